#pragma once

#include <map>
#include <string>
#include <vector>

namespace scrl {

// Versioned binary container for named float64 arrays plus one free-form
// JSON metadata blob. Layout (little-endian):
//   "SCRL" | u32 version | u32 json_len | json bytes | u64 n_records |
//   per record: u32 name_len | name | u32 ndim | u32 dims[] | f64 data[]
struct CheckpointRecord {
    std::vector<int> shape;
    std::vector<double> data;
};

struct Checkpoint {
    std::string metadata_json;
    // Ordered: write order == read order, so re-serialization is
    // byte-identical.
    std::vector<std::pair<std::string, CheckpointRecord>> records;

    const CheckpointRecord* find(const std::string& name) const;
    void add(const std::string& name, std::vector<int> shape,
             std::vector<double> data);
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Hex digest (FNV-1a, 64-bit) over the serialized records; used to detect
// any parameter drift, e.g. a frozen backbone that was not actually frozen.
std::string checkpoint_content_hash(const Checkpoint& ckpt);

}  // namespace scrl

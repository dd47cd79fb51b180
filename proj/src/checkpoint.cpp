#include "scrl/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace scrl {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'R', 'L'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

const CheckpointRecord* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, r] : records)
        if (n == name) return &r;
    return nullptr;
}

void Checkpoint::add(const std::string& name, std::vector<int> shape,
                     std::vector<double> data) {
    records.emplace_back(name,
                         CheckpointRecord{std::move(shape), std::move(data)});
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
    os.write(kMagic, 4);
    write_raw(os, kVersion);
    write_raw(os, uint32_t(ckpt.metadata_json.size()));
    os.write(ckpt.metadata_json.data(), ckpt.metadata_json.size());
    write_raw(os, uint64_t(ckpt.records.size()));
    for (const auto& [name, rec] : ckpt.records) {
        write_raw(os, uint32_t(name.size()));
        os.write(name.data(), name.size());
        write_raw(os, uint32_t(rec.shape.size()));
        for (int d : rec.shape) write_raw(os, uint32_t(d));
        os.write(reinterpret_cast<const char*>(rec.data.data()),
                 rec.data.size() * sizeof(double));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    uint32_t version = read_raw<uint32_t>(is);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " +
                                 std::to_string(version));
    Checkpoint ckpt;
    uint32_t json_len = read_raw<uint32_t>(is);
    ckpt.metadata_json.resize(json_len);
    is.read(ckpt.metadata_json.data(), json_len);
    uint64_t n_records = read_raw<uint64_t>(is);
    for (uint64_t i = 0; i < n_records; ++i) {
        uint32_t name_len = read_raw<uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        uint32_t ndim = read_raw<uint32_t>(is);
        CheckpointRecord rec;
        size_t numel = 1;
        for (uint32_t d = 0; d < ndim; ++d) {
            rec.shape.push_back(int(read_raw<uint32_t>(is)));
            numel *= rec.shape.back();
        }
        rec.data.resize(numel);
        is.read(reinterpret_cast<char*>(rec.data.data()),
                numel * sizeof(double));
        if (!is) throw std::runtime_error("checkpoint: truncated record");
        ckpt.records.emplace_back(std::move(name), std::move(rec));
    }
    return ckpt;
}

std::string checkpoint_content_hash(const Checkpoint& ckpt) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* p, size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [name, rec] : ckpt.records) {
        mix(name.data(), name.size());
        for (int d : rec.shape) mix(&d, sizeof(d));
        mix(rec.data.data(), rec.data.size() * sizeof(double));
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
    return std::string(buf);
}

}  // namespace scrl

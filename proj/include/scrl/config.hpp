#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace scrl::train {

enum class TrainMode { Scrl, GlobalByol };

TrainMode mode_from_string(const std::string& s);
std::string to_string(TrainMode m);

// Every hyperparameter of a run in one serializable record. The on-disk
// form is a flat `key = value` file; unknown keys are rejected so run
// manifests stay diff-able.
struct TrainConfig {
    TrainMode mode = TrainMode::Scrl;
    int k = 10;
    std::optional<double> iou_thr = 0.5;
    double jitter = 0.0;  // infinity = fully random replacement boxes
    double tau0 = 0.97;
    double lr0 = 0.8;
    int warmup_epochs = 2;
    int total_epochs = 16;
    int batch = 32;
    std::string optimizer = "sgd-momentum";
    double momentum = 0.9;
    double weight_decay = 1e-6;
    double trust_coeff = 0.001;
    uint64_t seed = 0;
    int workers = 1;

    // Data
    int image_size = 64;
    int dataset_size = 2000;

    // Architecture
    std::vector<int> encoder_channels = {16, 32, 64};
    int head_hidden = 512;
    int head_out = 64;
    int sampling_ratio = 2;

    int checkpoint_every_epochs = 0;  // 0 = final checkpoint only

    int64_t steps_per_epoch() const { return dataset_size / batch; }
    int64_t total_steps() const { return steps_per_epoch() * total_epochs; }

    void validate() const;  // throws std::invalid_argument
    void optimizer_kind_from_string_check() const;
    std::string to_file_string() const;
    std::string to_json() const;

    static TrainConfig from_file(const std::string& path);
    static TrainConfig from_string(const std::string& text);
};

}  // namespace scrl::train

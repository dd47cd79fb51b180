#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scrl/dataset.hpp"
#include "scrl/model.hpp"

namespace scrl::eval {

struct EvalConfig {
    int epochs = 20;        // linear-head epochs over cached features
    double lr0 = 0.1;
    int batch = 128;
    int warmup_epochs = 1;
    int bn_track_passes = 2;  // dataset passes re-tracking BN stats
    int extract_batch = 32;
    int sampling_ratio = 2;
    double train_fraction = 0.8;
    uint64_t seed = 0;
};

struct EvalReport {
    std::string protocol;  // "roi" or "global"
    double accuracy = 0.0;
    std::vector<double> per_class_accuracy;
    std::string backbone_hash;
    bool frozen = true;
    int train_examples = 0;
    int test_examples = 0;

    std::string to_json() const;
};

// Linear probe on frozen backbone features pooled over ground-truth
// boxes (one example per box). BN running statistics are reset and
// re-tracked on the probe's training split before features are
// extracted in eval mode; the backbone parameter hash is verified
// unchanged afterwards.
EvalReport roi_linear_eval(model::Encoder& backbone,
                           const std::vector<data::SyntheticImage>& dataset,
                           const EvalConfig& cfg);

// Same probe with global average pooling; the image label is the class
// of its largest ground-truth box.
EvalReport global_linear_eval(model::Encoder& backbone,
                              const std::vector<data::SyntheticImage>& dataset,
                              const EvalConfig& cfg);

struct CollapseReport {
    double embed_std = 0.0;    // mean per-dimension std of normalized projections
    double mean_cosine = 0.0;  // mean pairwise cosine similarity
    std::vector<int> cosine_hist;  // 20 bins over [-1, 1]

    std::string to_json() const;
};

// Diagnoses representational collapse from the target branch's
// projections of whole images (eval mode, at most 256 images).
CollapseReport collapse_probe(model::SiamesePair& pair,
                              const std::vector<data::SyntheticImage>& dataset);

// Reconstructs a SiamesePair from a training checkpoint (spec comes
// from the checkpoint metadata).
model::SiamesePair load_pair_checkpoint(const std::string& path);

// FNV-1a digest over the encoder's parameters (not BN buffers, which
// the probe legitimately re-tracks).
std::string encoder_param_hash(model::Encoder& enc);

}  // namespace scrl::eval

#pragma once

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "scrl/augment.hpp"
#include "scrl/config.hpp"
#include "scrl/dataset.hpp"
#include "scrl/model.hpp"
#include "scrl/ops.hpp"
#include "scrl/optim.hpp"

namespace scrl::train {

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Set from a signal handler; Trainer::run checkpoints and returns at the
// next step boundary.
extern std::atomic<bool> g_interrupt;

struct StepMetrics {
    int64_t step = 0;
    double loss = 0.0;
    double lr = 0.0;
    double tau = 0.0;
    double boxes_per_image = 0.0;
    double grad_norm = 0.0;
    double embed_std = 0.0;
};

// Mean squared error between row-normalized predictions and targets.
// q1 and z2 are [R,D], aligned row-by-row; the caller passes z2 already
// outside the gradient graph (stop-gradient).
nn::Tensor scrl_loss(const nn::Tensor& q1, const nn::Tensor& z2);

// Two augmented views of a batch plus the matched RoIs in each view's
// feature-grid coordinates. RoI row r of each list refers to the same
// source box.
struct PreparedBatch {
    nn::Tensor v1, v2;                    // [N,3,S,S]
    std::vector<nn::Roi> rois_v1, rois_v2;
    double boxes_per_image = 0.0;
    int skipped_images = 0;
};

class Trainer {
public:
    Trainer(TrainConfig cfg, std::vector<data::SyntheticImage> dataset);

    model::SiamesePair& pair() { return pair_; }
    const TrainConfig& config() const { return cfg_; }
    ScheduleConfig schedule() const;

    // Augments the listed dataset images and samples matched RoIs.
    // Images whose views fail to yield any RoI after the resampling
    // budget are dropped from the batch.
    PreparedBatch prepare_batch(const std::vector<int>& indices, int64_t step);

    // Eq-style total: online(v1) vs target(v2) plus online(v2) vs
    // target(v1); gradients flow into the online parameters only.
    nn::Tensor symmetrized_loss(const PreparedBatch& batch, bool training,
                                double* embed_std_out = nullptr);

    StepMetrics train_step(int64_t step);

    // Full loop: metrics.csv, run.json, checkpoints under out_dir.
    void run(const std::string& out_dir);

    void save_checkpoint(const std::string& path, int64_t step) const;
    int64_t load_checkpoint_for_resume(const std::string& path);

private:
    std::vector<int> draw_batch_indices(int64_t step);

    TrainConfig cfg_;
    std::vector<data::SyntheticImage> dataset_;
    model::SiamesePair pair_;
    Optimizer optimizer_;
    Rng run_rng_;
    data::AugmentParams aug1_, aug2_;
    int64_t start_step_ = 0;
};

// Builds the ModelSpec a TrainConfig describes.
model::ModelSpec model_spec_from(const TrainConfig& cfg);

}  // namespace scrl::train

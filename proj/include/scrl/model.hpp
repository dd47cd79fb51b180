#pragma once

#include <string>
#include <vector>

#include "scrl/checkpoint.hpp"
#include "scrl/geometry.hpp"
#include "scrl/rng.hpp"
#include "scrl/tensor.hpp"

namespace scrl::model {

// Plain strided convnet standing in for a large residual backbone; every
// paper-facing quantity (stride product, output channels) is configurable.
struct EncoderSpec {
    int input_size = 64;
    int in_channels = 3;
    std::vector<int> channels = {16, 32, 64, 128};
    int stage_stride = 2;
    int kernel = 3;

    int stride_product() const;
    int out_channels() const { return channels.back(); }
    geom::FeatureGridSpec grid() const;
};

struct HeadSpec {
    int in = 128;
    int hidden = 256;
    int out = 64;
    bool bn = true;
};

struct BatchNormLayer {
    nn::Tensor gamma, beta;
    std::vector<double> running_mean, running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    void init(int channels, bool trainable);
    void reset_running_stats();
};

struct NamedParam {
    std::string name;
    nn::Tensor tensor;
};

struct NamedBuffer {
    std::string name;
    std::vector<double>* values;
};

class Encoder {
public:
    void init(const EncoderSpec& spec, bool trainable, Rng& rng);
    // Spatial feature map [N, C-tilde, fh, fw]; no global pooling.
    nn::Tensor forward_spatial(const nn::Tensor& pixels, bool training);
    void collect(const std::string& prefix, std::vector<NamedParam>& params,
                 std::vector<NamedBuffer>& buffers);
    void reset_bn_stats();
    const EncoderSpec& spec() const { return spec_; }

private:
    EncoderSpec spec_;
    struct Stage {
        nn::Tensor weight;
        BatchNormLayer bn;
    };
    std::vector<Stage> stages_;
};

// linear -> BN -> ReLU -> linear (projector and predictor share this).
class MlpHead {
public:
    void init(const HeadSpec& spec, bool trainable, Rng& rng);
    nn::Tensor forward(const nn::Tensor& x, bool training);
    void collect(const std::string& prefix, std::vector<NamedParam>& params,
                 std::vector<NamedBuffer>& buffers);
    const HeadSpec& spec() const { return spec_; }

private:
    HeadSpec spec_;
    nn::Tensor w1_, b1_, w2_, b2_;
    BatchNormLayer bn_;
};

struct ModelSpec {
    EncoderSpec encoder;
    HeadSpec projector;  // projector.in is derived from the encoder
    HeadSpec predictor;  // predictor.in = projector.out

    std::string to_json() const;
    static ModelSpec from_json(const std::string& json);
};

// Online parameter set (encoder + projector + predictor) and its EMA
// target (encoder + projector, no predictor, never gradient-updated).
class SiamesePair {
public:
    void init(const ModelSpec& spec, Rng& rng);

    Encoder& online_encoder() { return online_encoder_; }
    MlpHead& online_projector() { return online_projector_; }
    MlpHead& predictor() { return predictor_; }
    Encoder& target_encoder() { return target_encoder_; }
    MlpHead& target_projector() { return target_projector_; }
    const ModelSpec& spec() const { return spec_; }

    // Online path for pooled features: (z, q).
    std::pair<nn::Tensor, nn::Tensor> project_predict(const nn::Tensor& pooled,
                                                      bool training);

    // xi <- tau * xi + (1 - tau) * theta, elementwise, including BN
    // running buffers.
    void ema_update(double tau);

    std::vector<NamedParam> online_params();   // trainable, requires_grad
    // Encoder + projector only, ordered like target_params().
    std::vector<NamedParam> online_params_no_predictor();
    std::vector<NamedParam> target_params();   // frozen
    std::vector<NamedBuffer> online_buffers();
    std::vector<NamedBuffer> target_buffers();

    void save(Checkpoint& ckpt) const;
    void load(const Checkpoint& ckpt);

private:
    ModelSpec spec_;
    Encoder online_encoder_, target_encoder_;
    MlpHead online_projector_, target_projector_, predictor_;
};

// He-uniform fan-in initialization for conv/linear weights.
nn::Tensor he_uniform(std::vector<int> shape, int fan_in, bool trainable,
                      Rng& rng);

}  // namespace scrl::model

#include "scrl/model.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "scrl/ops.hpp"

namespace scrl::model {

using nn::Tensor;

int EncoderSpec::stride_product() const {
    int s = 1;
    for (size_t i = 0; i < channels.size(); ++i) s *= stage_stride;
    return s;
}

geom::FeatureGridSpec EncoderSpec::grid() const {
    int s = stride_product();
    if (input_size % s != 0)
        throw std::invalid_argument(
            "EncoderSpec: input size not divisible by total stride");
    return geom::FeatureGridSpec{input_size, input_size, input_size / s,
                                 input_size / s};
}

Tensor he_uniform(std::vector<int> shape, int fan_in, bool trainable,
                  Rng& rng) {
    double bound = std::sqrt(6.0 / fan_in);
    std::vector<double> d(nn::numel_of(shape));
    for (double& v : d) v = rng.uniform(-bound, bound);
    return Tensor::from_data(std::move(shape), std::move(d), trainable);
}

void BatchNormLayer::init(int channels, bool trainable) {
    gamma = Tensor::full({channels}, 1.0, trainable);
    beta = Tensor::zeros({channels}, trainable);
    reset_running_stats();
}

void BatchNormLayer::reset_running_stats() {
    running_mean.assign(gamma.numel(), 0.0);
    running_var.assign(gamma.numel(), 1.0);
}

void Encoder::init(const EncoderSpec& spec, bool trainable, Rng& rng) {
    spec_ = spec;
    spec_.grid();  // validates divisibility
    stages_.clear();
    int in_ch = spec.in_channels;
    for (int out_ch : spec.channels) {
        Stage st;
        int fan_in = in_ch * spec.kernel * spec.kernel;
        st.weight = he_uniform({out_ch, in_ch, spec.kernel, spec.kernel},
                               fan_in, trainable, rng);
        st.bn.init(out_ch, trainable);
        stages_.push_back(std::move(st));
        in_ch = out_ch;
    }
}

Tensor Encoder::forward_spatial(const nn::Tensor& pixels, bool training) {
    if (pixels.ndim() != 4 || pixels.dim(2) != spec_.input_size ||
        pixels.dim(3) != spec_.input_size)
        throw nn::ShapeError("Encoder: expected [N,3," +
                             std::to_string(spec_.input_size) + "," +
                             std::to_string(spec_.input_size) + "], got " +
                             nn::shape_str(pixels.shape()));
    Tensor x = pixels;
    int pad = spec_.kernel / 2;
    for (auto& st : stages_) {
        x = nn::conv2d(x, st.weight, Tensor(), spec_.stage_stride, pad);
        x = nn::batch_norm2d(x, st.bn.gamma, st.bn.beta, st.bn.running_mean,
                             st.bn.running_var, st.bn.momentum, st.bn.eps,
                             training);
        x = nn::relu(x);
    }
    return x;
}

void Encoder::collect(const std::string& prefix,
                      std::vector<NamedParam>& params,
                      std::vector<NamedBuffer>& buffers) {
    for (size_t i = 0; i < stages_.size(); ++i) {
        std::string p = prefix + ".stage" + std::to_string(i);
        params.push_back({p + ".conv.weight", stages_[i].weight});
        params.push_back({p + ".bn.gamma", stages_[i].bn.gamma});
        params.push_back({p + ".bn.beta", stages_[i].bn.beta});
        buffers.push_back({p + ".bn.running_mean", &stages_[i].bn.running_mean});
        buffers.push_back({p + ".bn.running_var", &stages_[i].bn.running_var});
    }
}

void Encoder::reset_bn_stats() {
    for (auto& st : stages_) st.bn.reset_running_stats();
}

void MlpHead::init(const HeadSpec& spec, bool trainable, Rng& rng) {
    spec_ = spec;
    w1_ = he_uniform({spec.hidden, spec.in}, spec.in, trainable, rng);
    b1_ = Tensor::zeros({spec.hidden}, trainable);
    w2_ = he_uniform({spec.out, spec.hidden}, spec.hidden, trainable, rng);
    b2_ = Tensor::zeros({spec.out}, trainable);
    bn_.init(spec.hidden, trainable);
}

Tensor MlpHead::forward(const nn::Tensor& x, bool training) {
    Tensor h = nn::linear(x, w1_, b1_);
    if (spec_.bn)
        h = nn::batch_norm1d(h, bn_.gamma, bn_.beta, bn_.running_mean,
                             bn_.running_var, bn_.momentum, bn_.eps, training);
    h = nn::relu(h);
    return nn::linear(h, w2_, b2_);
}

void MlpHead::collect(const std::string& prefix,
                      std::vector<NamedParam>& params,
                      std::vector<NamedBuffer>& buffers) {
    params.push_back({prefix + ".fc1.weight", w1_});
    params.push_back({prefix + ".fc1.bias", b1_});
    params.push_back({prefix + ".fc2.weight", w2_});
    params.push_back({prefix + ".fc2.bias", b2_});
    if (spec_.bn) {
        params.push_back({prefix + ".bn.gamma", bn_.gamma});
        params.push_back({prefix + ".bn.beta", bn_.beta});
        buffers.push_back({prefix + ".bn.running_mean", &bn_.running_mean});
        buffers.push_back({prefix + ".bn.running_var", &bn_.running_var});
    }
}

std::string ModelSpec::to_json() const {
    nlohmann::json j;
    j["encoder"] = {{"input_size", encoder.input_size},
                    {"in_channels", encoder.in_channels},
                    {"channels", encoder.channels},
                    {"stage_stride", encoder.stage_stride},
                    {"kernel", encoder.kernel}};
    j["projector"] = {{"in", projector.in},
                      {"hidden", projector.hidden},
                      {"out", projector.out},
                      {"bn", projector.bn}};
    j["predictor"] = {{"in", predictor.in},
                      {"hidden", predictor.hidden},
                      {"out", predictor.out},
                      {"bn", predictor.bn}};
    return j.dump();
}

ModelSpec ModelSpec::from_json(const std::string& json) {
    nlohmann::json j = nlohmann::json::parse(json);
    ModelSpec s;
    s.encoder.input_size = j["encoder"]["input_size"];
    s.encoder.in_channels = j["encoder"]["in_channels"];
    s.encoder.channels = j["encoder"]["channels"].get<std::vector<int>>();
    s.encoder.stage_stride = j["encoder"]["stage_stride"];
    s.encoder.kernel = j["encoder"]["kernel"];
    auto head = [](const nlohmann::json& h) {
        return HeadSpec{h["in"], h["hidden"], h["out"], h["bn"]};
    };
    s.projector = head(j["projector"]);
    s.predictor = head(j["predictor"]);
    return s;
}

void SiamesePair::init(const ModelSpec& spec, Rng& rng) {
    spec_ = spec;
    spec_.projector.in = spec_.encoder.out_channels();
    spec_.predictor.in = spec_.projector.out;

    online_encoder_.init(spec_.encoder, /*trainable=*/true, rng);
    online_projector_.init(spec_.projector, true, rng);
    predictor_.init(spec_.predictor, true, rng);

    // The target starts as an exact copy of the online encoder/projector
    // and is never gradient-updated.
    Rng dummy(0);
    target_encoder_.init(spec_.encoder, /*trainable=*/false, dummy);
    target_projector_.init(spec_.projector, false, dummy);
    ema_update(0.0);  // tau = 0 copies theta into xi
}

std::pair<Tensor, Tensor> SiamesePair::project_predict(const Tensor& pooled,
                                                       bool training) {
    Tensor z = online_projector_.forward(pooled, training);
    Tensor q = predictor_.forward(z, training);
    return {z, q};
}

std::vector<NamedParam> SiamesePair::online_params() {
    std::vector<NamedParam> params;
    std::vector<NamedBuffer> buffers;
    online_encoder_.collect("online.encoder", params, buffers);
    online_projector_.collect("online.projector", params, buffers);
    predictor_.collect("online.predictor", params, buffers);
    return params;
}

std::vector<NamedParam> SiamesePair::online_params_no_predictor() {
    std::vector<NamedParam> params;
    std::vector<NamedBuffer> buffers;
    online_encoder_.collect("online.encoder", params, buffers);
    online_projector_.collect("online.projector", params, buffers);
    return params;
}

std::vector<NamedParam> SiamesePair::target_params() {
    std::vector<NamedParam> params;
    std::vector<NamedBuffer> buffers;
    target_encoder_.collect("target.encoder", params, buffers);
    target_projector_.collect("target.projector", params, buffers);
    return params;
}

std::vector<NamedBuffer> SiamesePair::online_buffers() {
    std::vector<NamedParam> params;
    std::vector<NamedBuffer> buffers;
    online_encoder_.collect("online.encoder", params, buffers);
    online_projector_.collect("online.projector", params, buffers);
    predictor_.collect("online.predictor", params, buffers);
    return buffers;
}

std::vector<NamedBuffer> SiamesePair::target_buffers() {
    std::vector<NamedParam> params;
    std::vector<NamedBuffer> buffers;
    target_encoder_.collect("target.encoder", params, buffers);
    target_projector_.collect("target.projector", params, buffers);
    return buffers;
}

void SiamesePair::ema_update(double tau) {
    if (tau < 0.0 || tau > 1.0)
        throw std::invalid_argument("ema_update: tau outside [0,1]");
    // The online encoder/projector and the target collect in the same
    // structural order; the predictor is collected last on the online
    // side and has no target counterpart.
    std::vector<NamedParam> theta_p;
    std::vector<NamedBuffer> theta_b;
    online_encoder_.collect("online.encoder", theta_p, theta_b);
    online_projector_.collect("online.projector", theta_p, theta_b);
    auto xi_p = target_params();
    auto xi_b = target_buffers();
    if (theta_p.size() != xi_p.size())
        throw std::logic_error("ema_update: parameter count mismatch");
    for (size_t i = 0; i < theta_p.size(); ++i) {
        if (theta_p[i].tensor.shape() != xi_p[i].tensor.shape())
            throw std::logic_error("ema_update: shape mismatch at " +
                                   theta_p[i].name);
        auto& t = theta_p[i].tensor.data();
        auto& x = xi_p[i].tensor.data();
        for (size_t j = 0; j < t.size(); ++j)
            x[j] = tau * x[j] + (1.0 - tau) * t[j];
    }
    for (size_t i = 0; i < theta_b.size(); ++i) {
        auto& t = *theta_b[i].values;
        auto& x = *xi_b[i].values;
        for (size_t j = 0; j < t.size(); ++j)
            x[j] = tau * x[j] + (1.0 - tau) * t[j];
    }
}

void SiamesePair::save(Checkpoint& ckpt) const {
    auto* self = const_cast<SiamesePair*>(this);
    for (auto& p : self->online_params())
        ckpt.add(p.name, p.tensor.shape(), p.tensor.data());
    for (auto& p : self->target_params())
        ckpt.add(p.name, p.tensor.shape(), p.tensor.data());
    for (auto& b : self->online_buffers())
        ckpt.add(b.name, {int(b.values->size())}, *b.values);
    for (auto& b : self->target_buffers())
        ckpt.add(b.name, {int(b.values->size())}, *b.values);
}

void SiamesePair::load(const Checkpoint& ckpt) {
    auto restore_params = [&](std::vector<NamedParam> params) {
        for (auto& p : params) {
            const CheckpointRecord* rec = ckpt.find(p.name);
            if (!rec)
                throw std::runtime_error("checkpoint missing record " + p.name);
            if (rec->shape != p.tensor.shape())
                throw std::runtime_error("checkpoint shape mismatch at " +
                                         p.name);
            p.tensor.data() = rec->data;
        }
    };
    auto restore_buffers = [&](std::vector<NamedBuffer> buffers) {
        for (auto& b : buffers) {
            const CheckpointRecord* rec = ckpt.find(b.name);
            if (!rec)
                throw std::runtime_error("checkpoint missing record " + b.name);
            *b.values = rec->data;
        }
    };
    restore_params(online_params());
    restore_params(target_params());
    restore_buffers(online_buffers());
    restore_buffers(target_buffers());
}

}  // namespace scrl::model

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "scrl/checkpoint.hpp"
#include "scrl/model.hpp"
#include "scrl/ops.hpp"

using namespace scrl;
using namespace scrl::model;

namespace {

nn::Tensor random_pixels(std::vector<int> shape, uint64_t seed) {
    Rng rng(seed);
    nn::Tensor t = nn::Tensor::zeros(shape);
    for (double& v : t.data()) v = rng.uniform();
    return t;
}

ModelSpec tiny_spec() {
    ModelSpec s;
    s.encoder.input_size = 16;
    s.encoder.channels = {4, 6};
    s.projector = {6, 8, 5, true};
    s.predictor = {5, 8, 5, true};
    return s;
}

double max_param_diff(std::vector<NamedParam> a, std::vector<NamedParam> b) {
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < a[i].tensor.numel(); ++j)
            m = std::max(m, std::fabs(a[i].tensor.data()[j] -
                                      b[i].tensor.data()[j]));
    return m;
}

}  // namespace

TEST_CASE("encoder stride arithmetic: 64 input with 4 stages gives a 4x4 map") {
    EncoderSpec spec;
    CHECK(spec.stride_product() == 16);
    geom::FeatureGridSpec grid = spec.grid();
    CHECK(grid.feat_w == 4);
    CHECK(grid.feat_h == 4);

    Rng rng(1);
    Encoder enc;
    enc.init(spec, true, rng);
    nn::Tensor x = random_pixels({2, 3, 64, 64}, 2);
    nn::Tensor f = enc.forward_spatial(x, false);
    CHECK(f.shape() == std::vector<int>{2, 128, 4, 4});
}

TEST_CASE("identical batch items produce identical feature maps") {
    Rng rng(3);
    Encoder enc;
    EncoderSpec spec;
    spec.input_size = 16;
    spec.channels = {4, 6};
    enc.init(spec, true, rng);
    nn::Tensor one = random_pixels({1, 3, 16, 16}, 4);
    std::vector<double> rep;
    for (int i = 0; i < 3; ++i)
        rep.insert(rep.end(), one.data().begin(), one.data().end());
    nn::Tensor f =
        enc.forward_spatial(nn::Tensor::from_data({3, 3, 16, 16}, rep), false);
    size_t per = f.numel() / 3;
    for (size_t i = 0; i < per; ++i) {
        CHECK(f.data()[i] == f.data()[per + i]);
        CHECK(f.data()[i] == f.data()[2 * per + i]);
    }
}

TEST_CASE("zero input propagates to zero through freshly initialized heads") {
    // Zero-init biases and BN eval mode (running mean 0, var 1) keep every
    // intermediate at zero.
    Rng rng(5);
    SiamesePair pair;
    pair.init(tiny_spec(), rng);
    nn::Tensor zero = nn::Tensor::zeros({3, 6});
    auto [z, q] = pair.project_predict(zero, false);
    for (double v : z.data()) CHECK(v == 0.0);
    for (double v : q.data()) CHECK(v == 0.0);
}

TEST_CASE("project_predict keeps the row count") {
    Rng rng(6);
    SiamesePair pair;
    pair.init(tiny_spec(), rng);
    auto [z, q] = pair.project_predict(random_pixels({7, 6}, 8), true);
    CHECK(z.shape() == std::vector<int>{7, 5});
    CHECK(q.shape() == std::vector<int>{7, 5});
}

TEST_CASE("bias-free BN-free heads are positively homogeneous") {
    HeadSpec hs{6, 8, 5, false};
    Rng rng(7);
    MlpHead head;
    head.init(hs, true, rng);
    std::vector<NamedParam> params;
    std::vector<NamedBuffer> buffers;
    head.collect("h", params, buffers);
    for (auto& p : params)
        if (p.name.find("bias") != std::string::npos)
            std::fill(p.tensor.data().begin(), p.tensor.data().end(), 0.0);

    nn::Tensor x = random_pixels({4, 6}, 9);
    const double alpha = 2.5;
    nn::Tensor xs = nn::scale(x, alpha);
    nn::Tensor y = head.forward(x, false);
    nn::Tensor ys = head.forward(xs, false);
    for (size_t i = 0; i < y.numel(); ++i)
        CHECK(ys.data()[i] ==
              doctest::Approx(alpha * y.data()[i]).epsilon(1e-12));
}

TEST_CASE("ema update identities") {
    Rng rng(10);
    SiamesePair pair;
    pair.init(tiny_spec(), rng);
    // Make the branches differ first.
    for (auto& p : pair.online_params())
        for (double& v : p.tensor.data()) v += 0.25;

    SUBCASE("tau=1 leaves the target unchanged") {
        auto before = pair.target_params();
        std::vector<std::vector<double>> snap;
        for (auto& p : before) snap.push_back(p.tensor.data());
        pair.ema_update(1.0);
        auto after = pair.target_params();
        for (size_t i = 0; i < after.size(); ++i)
            CHECK(after[i].tensor.data() == snap[i]);
    }
    SUBCASE("tau=0 copies the online branch") {
        pair.ema_update(0.0);
        CHECK(max_param_diff(pair.online_params_no_predictor(),
                             pair.target_params()) == 0.0);
    }
    SUBCASE("tau=0.97 interpolates: 0 -> 0.03 against theta=1") {
        for (auto& p : pair.online_params())
            std::fill(p.tensor.data().begin(), p.tensor.data().end(), 1.0);
        for (auto& p : pair.target_params())
            std::fill(p.tensor.data().begin(), p.tensor.data().end(), 0.0);
        pair.ema_update(0.97);
        for (auto& p : pair.target_params())
            for (double v : p.tensor.data())
                CHECK(v == doctest::Approx(0.03).epsilon(1e-12));
    }
    SUBCASE("distance to a fixed theta decays geometrically") {
        const double tau = 0.9;
        nn::Tensor probe_t = pair.target_params()[0].tensor;
        nn::Tensor probe_o = pair.online_params()[0].tensor;
        double prev = -1.0;
        for (int it = 0; it < 5; ++it) {
            pair.ema_update(tau);
            double dist = 0.0;
            for (size_t j = 0; j < probe_t.numel(); ++j)
                dist += std::pow(probe_t.data()[j] - probe_o.data()[j], 2);
            dist = std::sqrt(dist);
            if (prev >= 0.0) CHECK(dist == doctest::Approx(tau * prev).epsilon(1e-9));
            prev = dist;
        }
    }
}

TEST_CASE("target layer shapes always mirror the online ones") {
    Rng rng(11);
    SiamesePair pair;
    pair.init(tiny_spec(), rng);
    for (int i = 0; i < 3; ++i) pair.ema_update(0.5);
    auto on = pair.online_params_no_predictor();
    auto tg = pair.target_params();
    REQUIRE(on.size() == tg.size());
    for (size_t i = 0; i < on.size(); ++i)
        CHECK(on[i].tensor.shape() == tg[i].tensor.shape());
}

TEST_CASE("checkpoint round trip restores every parameter and the spec") {
    Rng rng(12);
    SiamesePair pair;
    pair.init(tiny_spec(), rng);
    Checkpoint ckpt;
    ckpt.metadata_json = "{}";
    pair.save(ckpt);

    Rng rng2(999);  // different init, must be fully overwritten
    SiamesePair other;
    other.init(tiny_spec(), rng2);
    other.load(ckpt);
    CHECK(max_param_diff(pair.online_params(), other.online_params()) == 0.0);
    CHECK(max_param_diff(pair.target_params(), other.target_params()) == 0.0);

    ModelSpec spec2 = ModelSpec::from_json(tiny_spec().to_json());
    CHECK(spec2.to_json() == tiny_spec().to_json());
}

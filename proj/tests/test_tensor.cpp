#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "scrl/checkpoint.hpp"
#include "scrl/gradcheck.hpp"
#include "scrl/ops.hpp"
#include "scrl/rng.hpp"
#include "scrl/tensor.hpp"

using namespace scrl;
using namespace scrl::nn;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, bool rg = false) {
    std::vector<double> d(numel_of(shape));
    for (double& v : d) v = rng.normal();
    return Tensor::from_data(std::move(shape), std::move(d), rg);
}

// Independent 6-loop conv reference.
std::vector<double> conv_ref(const Tensor& x, const Tensor& w, int stride,
                             int pad) {
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    int F = w.dim(0), KH = w.dim(2), KW = w.dim(3);
    int OH = (H + 2 * pad - KH) / stride + 1;
    int OW = (W + 2 * pad - KW) / stride + 1;
    std::vector<double> out(size_t(N) * F * OH * OW, 0.0);
    for (int n = 0; n < N; ++n)
        for (int f = 0; f < F; ++f)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    double acc = 0.0;
                    for (int c = 0; c < C; ++c)
                        for (int ky = 0; ky < KH; ++ky)
                            for (int kx = 0; kx < KW; ++kx) {
                                int ih = oh * stride - pad + ky;
                                int iw = ow * stride - pad + kx;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W)
                                    continue;
                                acc += x.data()[((size_t(n) * C + c) * H + ih) *
                                                    W + iw] *
                                       w.data()[((size_t(f) * C + c) * KH + ky) *
                                                    KW + kx];
                            }
                    out[((size_t(n) * F + f) * OH + oh) * OW + ow] = acc;
                }
    return out;
}

// Independent scalar bilinear + box-average reference for 1x1 RoIAlign.
double roi_ref(const Tensor& feat, int batch, const geom::Box& box, int s,
               int channel) {
    int C = feat.dim(1), FH = feat.dim(2), FW = feat.dim(3);
    const double* plane =
        feat.data().data() + (size_t(batch) * C + channel) * FH * FW;
    double acc = 0.0;
    for (int iy = 0; iy < s; ++iy)
        for (int ix = 0; ix < s; ++ix) {
            double y = box.y + (iy + 0.5) * box.h / s;
            double x = box.x + (ix + 0.5) * box.w / s;
            double u = std::clamp(x - 0.5, 0.0, double(FW - 1));
            double v = std::clamp(y - 0.5, 0.0, double(FH - 1));
            int x0 = int(u), y0 = int(v);
            int x1 = std::min(x0 + 1, FW - 1), y1 = std::min(y0 + 1, FH - 1);
            double tx = u - x0, ty = v - y0;
            acc += (1 - ty) * ((1 - tx) * plane[y0 * FW + x0] +
                               tx * plane[y0 * FW + x1]) +
                   ty * ((1 - tx) * plane[y1 * FW + x0] +
                         tx * plane[y1 * FW + x1]);
        }
    return acc / (s * s);
}

}  // namespace

TEST_CASE("elementwise ops and backward") {
    Rng rng(1);
    Tensor a = random_tensor({3, 4}, rng, true);
    Tensor b = random_tensor({3, 4}, rng, true);
    Tensor loss = sum_all(mul(add(a, b), sub(a, b)));  // sum(a^2 - b^2)
    double expect = 0.0;
    for (size_t i = 0; i < a.numel(); ++i)
        expect += a.data()[i] * a.data()[i] - b.data()[i] * b.data()[i];
    CHECK(loss.value() == doctest::Approx(expect));
    loss.backward();
    for (size_t i = 0; i < a.numel(); ++i) {
        CHECK(a.grad()[i] == doctest::Approx(2.0 * a.data()[i]));
        CHECK(b.grad()[i] == doctest::Approx(-2.0 * b.data()[i]));
    }
}

TEST_CASE("conv2d 1x1 identity kernel") {
    Rng rng(2);
    Tensor x = random_tensor({1, 1, 5, 5}, rng);
    Tensor w = Tensor::from_data({1, 1, 1, 1}, {1.0});
    Tensor y = conv2d(x, w, Tensor(), 1, 0);
    for (size_t i = 0; i < x.numel(); ++i)
        CHECK(y.data()[i] == doctest::Approx(x.data()[i]));
}

TEST_CASE("conv2d all-ones 3x3 counts neighbours") {
    Tensor x = Tensor::full({1, 1, 5, 5}, 1.0);
    Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor y = conv2d(x, w, Tensor(), 1, 0);
    CHECK(y.dim(2) == 3);
    for (double v : y.data()) CHECK(v == doctest::Approx(9.0));
}

TEST_CASE("conv2d matches the naive reference") {
    Rng rng(3);
    for (auto [stride, pad] : {std::pair{1, 0}, {1, 1}, {2, 1}, {2, 0}}) {
        Tensor x = random_tensor({2, 3, 9, 7}, rng);
        Tensor w = random_tensor({4, 3, 3, 3}, rng);
        Tensor y = conv2d(x, w, Tensor(), stride, pad);
        auto ref = conv_ref(x, w, stride, pad);
        REQUIRE(y.numel() == ref.size());
        double max_diff = 0.0;
        for (size_t i = 0; i < ref.size(); ++i)
            max_diff = std::max(max_diff, std::fabs(y.data()[i] - ref[i]));
        CHECK(max_diff < 1e-12);
    }
}

TEST_CASE("conv2d rejects incompatible shapes") {
    Rng rng(4);
    Tensor x = random_tensor({1, 3, 8, 8}, rng);
    Tensor w = random_tensor({4, 2, 3, 3}, rng);
    CHECK_THROWS_AS(conv2d(x, w, Tensor(), 1, 1), ShapeError);
}

TEST_CASE("linear matches a naive matmul") {
    Rng rng(5);
    Tensor x = random_tensor({4, 6}, rng);
    Tensor w = random_tensor({3, 6}, rng);
    Tensor b = random_tensor({3}, rng);
    Tensor y = linear(x, w, b);
    double max_diff = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = b.data()[j];
            for (int k = 0; k < 6; ++k)
                acc += x.data()[i * 6 + k] * w.data()[j * 6 + k];
            max_diff = std::max(max_diff, std::fabs(acc - y.data()[i * 3 + j]));
        }
    CHECK(max_diff < 1e-12);
}

TEST_CASE("relu values") {
    Tensor x = Tensor::from_data({2}, {-1.0, 2.0});
    Tensor y = relu(x);
    CHECK(y.data()[0] == 0.0);
    CHECK(y.data()[1] == 2.0);
}

TEST_CASE("batch_norm on a normalized batch is near identity") {
    // Two rows with zero mean and unit (biased) variance per feature.
    Tensor x = Tensor::from_data({2, 2}, {1.0, -1.0, -1.0, 1.0});
    Tensor gamma = Tensor::full({2}, 1.0);
    Tensor beta = Tensor::zeros({2});
    std::vector<double> rm(2, 0.0), rv(2, 1.0);
    Tensor y = batch_norm1d(x, gamma, beta, rm, rv, 0.1, 1e-5, true);
    for (size_t i = 0; i < x.numel(); ++i)
        CHECK(std::fabs(y.data()[i] - x.data()[i]) < 1e-5);
}

TEST_CASE("batch_norm training rejects a batch of one") {
    Tensor x = Tensor::from_data({1, 2}, {1.0, 2.0});
    Tensor gamma = Tensor::full({2}, 1.0);
    Tensor beta = Tensor::zeros({2});
    std::vector<double> rm(2, 0.0), rv(2, 1.0);
    CHECK_THROWS_AS(batch_norm1d(x, gamma, beta, rm, rv, 0.1, 1e-5, true),
                    ShapeError);
    // Eval mode is fine with one row.
    CHECK_NOTHROW(batch_norm1d(x, gamma, beta, rm, rv, 0.1, 1e-5, false));
}

TEST_CASE("batch_norm running stats converge to the batch stats") {
    Rng rng(6);
    Tensor gamma = Tensor::full({3}, 1.0);
    Tensor beta = Tensor::zeros({3});
    std::vector<double> rm(3, 0.0), rv(3, 1.0);
    Tensor x = random_tensor({16, 3}, rng);
    for (int i = 0; i < 200; ++i)
        batch_norm1d(x, gamma, beta, rm, rv, 0.1, 1e-5, true);
    for (int c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (int n = 0; n < 16; ++n) mean += x.data()[n * 3 + c];
        mean /= 16;
        CHECK(rm[c] == doctest::Approx(mean).epsilon(1e-6));
    }
}

TEST_CASE("l2_normalize basics") {
    Tensor x = Tensor::from_data({1, 2}, {3.0, 4.0});
    Tensor y = l2_normalize(x);
    CHECK(y.data()[0] == doctest::Approx(0.6));
    CHECK(y.data()[1] == doctest::Approx(0.8));

    Tensor unit = Tensor::from_data({1, 2}, {1.0, 0.0});
    Tensor yu = l2_normalize(unit);
    CHECK(yu.data()[0] == doctest::Approx(1.0));

    Tensor zero = Tensor::zeros({1, 3});
    Tensor yz = l2_normalize(zero);
    for (double v : yz.data()) CHECK(v == 0.0);
}

TEST_CASE("l2_normalize output norm is one for non-tiny inputs") {
    Rng rng(7);
    Tensor x = random_tensor({32, 8}, rng);
    Tensor y = l2_normalize(x);
    for (int i = 0; i < 32; ++i) {
        double sq = 0.0;
        for (int j = 0; j < 8; ++j) sq += y.data()[i * 8 + j] * y.data()[i * 8 + j];
        CHECK(std::fabs(std::sqrt(sq) - 1.0) < 1e-9);
    }
}

TEST_CASE("roi_align constant map pools the constant") {
    Tensor feat = Tensor::full({1, 2, 4, 4}, 3.25);
    std::vector<Roi> rois = {{0, geom::Box{0.7, 1.1, 2.3, 1.9}},
                             {0, geom::Box{0.0, 0.0, 4.0, 4.0}}};
    Tensor out = roi_align_1x1(feat, rois, 2);
    for (double v : out.data()) CHECK(v == doctest::Approx(3.25));
}

TEST_CASE("roi_align center sample on a 2x2 map") {
    Tensor feat = Tensor::from_data({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    std::vector<Roi> rois = {{0, geom::Box{0, 0, 2, 2}}};
    Tensor out = roi_align_1x1(feat, rois, 1);
    CHECK(out.data()[0] == doctest::Approx(2.5));
}

TEST_CASE("roi_align matches the brute-force oracle") {
    Rng rng(8);
    Tensor feat = random_tensor({2, 3, 6, 5}, rng);
    double max_diff = 0.0;
    for (int i = 0; i < 1000; ++i) {
        geom::Box box{rng.uniform(-0.5, 4.5), rng.uniform(-0.5, 5.5),
                      rng.uniform(0.05, 5.0), rng.uniform(0.05, 6.0)};
        int batch = int(rng.uniform_int(2));
        int s = 1 + int(rng.uniform_int(3));
        std::vector<Roi> rois = {{batch, box}};
        Tensor out = roi_align_1x1(feat, rois, s);
        for (int c = 0; c < 3; ++c)
            max_diff = std::max(
                max_diff,
                std::fabs(out.data()[c] - roi_ref(feat, batch, box, s, c)));
    }
    CHECK(max_diff < 1e-9);
}

TEST_CASE("roi_align is linear in the features") {
    Rng rng(9);
    Tensor a = random_tensor({1, 2, 5, 5}, rng);
    Tensor b = random_tensor({1, 2, 5, 5}, rng);
    double alpha = 0.7, beta = -1.3;
    std::vector<double> mix(a.numel());
    for (size_t i = 0; i < mix.size(); ++i)
        mix[i] = alpha * a.data()[i] + beta * b.data()[i];
    Tensor m = Tensor::from_data({1, 2, 5, 5}, mix);
    std::vector<Roi> rois = {{0, geom::Box{0.3, 0.9, 3.1, 2.2}}};
    Tensor pa = roi_align_1x1(a, rois, 2);
    Tensor pb = roi_align_1x1(b, rois, 2);
    Tensor pm = roi_align_1x1(m, rois, 2);
    for (size_t i = 0; i < pm.numel(); ++i)
        CHECK(std::fabs(pm.data()[i] -
                        (alpha * pa.data()[i] + beta * pb.data()[i])) < 1e-12);
}

TEST_CASE("roi_align rejects an invalid batch index") {
    Tensor feat = Tensor::full({1, 1, 4, 4}, 1.0);
    std::vector<Roi> rois = {{3, geom::Box{0, 0, 2, 2}}};
    CHECK_THROWS_AS(roi_align_1x1(feat, rois, 2), ShapeError);
}

TEST_CASE("grad_check on a quadratic is exact") {
    Rng rng(10);
    Parameter p{"p", random_tensor({8}, rng, true)};
    auto build = [&] { return scale(sum_all(mul(p.tensor, p.tensor)), 0.5); };
    Rng check_rng(11);
    auto rep = grad_check(build, {&p}, 1e-5, 8, check_rng);
    CHECK(rep.max_rel_error < 1e-8);
}

TEST_CASE("per-op gradients pass finite differences") {
    Rng rng(12);
    Rng check_rng(13);

    SUBCASE("conv2d") {
        Parameter x{"x", random_tensor({2, 2, 6, 6}, rng, true)};
        Parameter w{"w", random_tensor({3, 2, 3, 3}, rng, true)};
        Parameter b{"b", random_tensor({3}, rng, true)};
        auto build = [&] {
            Tensor y = conv2d(x.tensor, w.tensor, b.tensor, 2, 1);
            return sum_all(mul(y, y));
        };
        auto rep = grad_check(build, {&x, &w, &b}, 1e-5, 12, check_rng);
        CHECK(rep.max_rel_error < 1e-6);
    }
    SUBCASE("linear") {
        Parameter x{"x", random_tensor({3, 5}, rng, true)};
        Parameter w{"w", random_tensor({4, 5}, rng, true)};
        Parameter b{"b", random_tensor({4}, rng, true)};
        auto build = [&] {
            Tensor y = linear(x.tensor, w.tensor, b.tensor);
            return sum_all(mul(y, y));
        };
        auto rep = grad_check(build, {&x, &w, &b}, 1e-5, 12, check_rng);
        CHECK(rep.max_rel_error < 1e-6);
    }
    SUBCASE("relu away from the kink") {
        std::vector<double> d(12);
        for (double& v : d) {
            v = rng.normal();
            if (std::fabs(v) < 0.05) v = 0.5;  // keep clear of 0
        }
        Parameter x{"x", Tensor::from_data({12}, d, true)};
        auto build = [&] {
            Tensor y = relu(x.tensor);
            return sum_all(mul(y, y));
        };
        auto rep = grad_check(build, {&x}, 1e-5, 12, check_rng);
        CHECK(rep.max_rel_error < 1e-6);
    }
    SUBCASE("batch_norm1d training mode") {
        Parameter x{"x", random_tensor({6, 4}, rng, true)};
        Parameter g{"g", random_tensor({4}, rng, true)};
        Parameter be{"b", random_tensor({4}, rng, true)};
        std::vector<double> rm(4, 0.0), rv(4, 1.0);
        auto build = [&] {
            Tensor y = batch_norm1d(x.tensor, g.tensor, be.tensor, rm, rv, 0.1,
                                    1e-5, true);
            return sum_all(mul(y, y));
        };
        auto rep = grad_check(build, {&x, &g, &be}, 1e-5, 12, check_rng);
        CHECK(rep.max_rel_error < 1e-5);
    }
    SUBCASE("batch_norm2d training mode") {
        Parameter x{"x", random_tensor({3, 2, 4, 4}, rng, true)};
        Parameter g{"g", random_tensor({2}, rng, true)};
        Parameter be{"b", random_tensor({2}, rng, true)};
        std::vector<double> rm(2, 0.0), rv(2, 1.0);
        auto build = [&] {
            Tensor y = batch_norm2d(x.tensor, g.tensor, be.tensor, rm, rv, 0.1,
                                    1e-5, true);
            return sum_all(mul(y, y));
        };
        auto rep = grad_check(build, {&x, &g, &be}, 1e-5, 12, check_rng);
        CHECK(rep.max_rel_error < 1e-5);
    }
    SUBCASE("roi_align") {
        Parameter x{"x", random_tensor({2, 3, 5, 5}, rng, true)};
        std::vector<Roi> rois = {{0, geom::Box{0.4, 0.8, 3.0, 2.5}},
                                 {1, geom::Box{-0.2, 1.0, 4.5, 3.9}},
                                 {0, geom::Box{2.0, 2.0, 0.3, 0.4}}};
        auto build = [&] {
            Tensor y = roi_align_1x1(x.tensor, rois, 2);
            return sum_all(mul(y, y));
        };
        auto rep = grad_check(build, {&x}, 1e-5, 20, check_rng);
        CHECK(rep.max_rel_error < 1e-6);
    }
    SUBCASE("l2_normalize") {
        Parameter x{"x", random_tensor({4, 6}, rng, true)};
        Parameter t{"t", random_tensor({4, 6}, rng, true)};
        auto build = [&] {
            Tensor d = sub(l2_normalize(x.tensor), l2_normalize(t.tensor));
            return sum_all(mul(d, d));
        };
        auto rep = grad_check(build, {&x, &t}, 1e-5, 12, check_rng);
        CHECK(rep.max_rel_error < 1e-5);
    }
    SUBCASE("global_avg_pool") {
        Parameter x{"x", random_tensor({2, 3, 4, 4}, rng, true)};
        auto build = [&] {
            Tensor y = global_avg_pool(x.tensor);
            return sum_all(mul(y, y));
        };
        auto rep = grad_check(build, {&x}, 1e-5, 12, check_rng);
        CHECK(rep.max_rel_error < 1e-6);
    }
    SUBCASE("cross_entropy") {
        Parameter x{"x", random_tensor({5, 4}, rng, true)};
        std::vector<int> labels = {0, 3, 1, 2, 2};
        auto build = [&] { return cross_entropy_logits(x.tensor, labels); };
        auto rep = grad_check(build, {&x}, 1e-5, 20, check_rng);
        CHECK(rep.max_rel_error < 1e-5);
    }
}

TEST_CASE("detach blocks gradients") {
    Rng rng(14);
    Tensor x = random_tensor({4}, rng, true);
    Tensor loss = sum_all(mul(x.detach(), x));
    loss.backward();
    // d/dx (c * x) = c, not 2x.
    for (size_t i = 0; i < x.numel(); ++i)
        CHECK(x.grad()[i] == doctest::Approx(x.data()[i]));
}

TEST_CASE("no grad buffer appears on frozen tensors") {
    Rng rng(15);
    Tensor x = random_tensor({4}, rng, true);
    Tensor frozen = random_tensor({4}, rng, false);
    Tensor loss = sum_all(mul(x, frozen));
    loss.backward();
    CHECK(x.has_grad());
    CHECK_FALSE(frozen.has_grad());
}

TEST_CASE("checkpoint round trip is byte identical") {
    namespace fs = std::filesystem;
    Rng rng(16);
    Checkpoint ckpt;
    ckpt.metadata_json = "{\"step\":7}";
    for (int i = 0; i < 3; ++i) {
        std::vector<double> d(12);
        for (double& v : d) v = rng.normal();
        ckpt.add("param" + std::to_string(i), {3, 4}, d);
    }
    fs::path dir = fs::temp_directory_path() / "scrl_ckpt_test";
    fs::create_directories(dir);
    std::string p1 = (dir / "a.ckpt").string();
    std::string p2 = (dir / "b.ckpt").string();
    save_checkpoint(p1, ckpt);
    Checkpoint loaded = load_checkpoint(p1);
    CHECK(loaded.metadata_json == ckpt.metadata_json);
    REQUIRE(loaded.records.size() == ckpt.records.size());
    save_checkpoint(p2, loaded);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), {});
    std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
    CHECK(checkpoint_content_hash(ckpt) == checkpoint_content_hash(loaded));
    const CheckpointRecord* rec = loaded.find("param1");
    REQUIRE(rec != nullptr);
    CHECK(rec->shape == std::vector<int>{3, 4});
}

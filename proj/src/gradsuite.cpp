#include "scrl/gradsuite.hpp"

#include <algorithm>
#include <cmath>

#include "scrl/gradcheck.hpp"
#include "scrl/ops.hpp"
#include "scrl/trainer.hpp"

namespace scrl::nn {

double SuiteResult::worst() const {
    double w = 0.0;
    for (const auto& c : cases) w = std::max(w, c.max_rel_error);
    return w;
}

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, bool away_from_zero) {
    Tensor t = Tensor::zeros(shape, true);
    for (double& v : t.data()) {
        v = rng.uniform(-1.0, 1.0);
        // Keep ReLU inputs clear of the kink so finite differences see a
        // locally smooth function.
        if (away_from_zero) v += v >= 0.0 ? 0.1 : -0.1;
    }
    return t;
}

void run_case(SuiteResult& out, const std::string& name,
              const std::function<Tensor()>& loss,
              std::vector<Parameter*> params, Rng& rng, int coords = 6) {
    GradCheckReport rep = grad_check(loss, params, 1e-5, coords, rng);
    out.cases.push_back({name, rep.max_rel_error});
}

}  // namespace

SuiteResult run_gradient_suite(uint64_t seed) {
    SuiteResult out;
    Rng rng(seed);

    {
        Tensor x = random_tensor({2, 2, 6, 6}, rng, false);
        Tensor w = random_tensor({3, 2, 3, 3}, rng, false);
        Tensor b = random_tensor({3}, rng, false);
        Parameter px{"x", x}, pw{"w", w}, pb{"b", b};
        auto loss = [&] {
            Tensor y = conv2d(x, w, b, 2, 1);
            return sum_all(mul(y, y));
        };
        run_case(out, "conv2d", loss, {&px, &pw, &pb}, rng);
    }
    {
        Tensor x = random_tensor({3, 4}, rng, false);
        Tensor w = random_tensor({5, 4}, rng, false);
        Tensor b = random_tensor({5}, rng, false);
        Parameter px{"x", x}, pw{"w", w}, pb{"b", b};
        auto loss = [&] {
            Tensor y = linear(x, w, b);
            return sum_all(mul(y, y));
        };
        run_case(out, "linear", loss, {&px, &pw, &pb}, rng);
    }
    {
        Tensor x = random_tensor({2, 3, 4, 4}, rng, true);
        Parameter px{"x", x};
        auto loss = [&] { return sum_all(mul(relu(x), relu(x))); };
        run_case(out, "relu", loss, {&px}, rng);
    }
    {
        Tensor x = random_tensor({3, 2, 4, 4}, rng, false);
        Tensor g = random_tensor({2}, rng, true);
        Tensor b = random_tensor({2}, rng, false);
        Parameter px{"x", x}, pg{"gamma", g}, pb{"beta", b};
        std::vector<double> rm(2, 0.0), rv(2, 1.0);
        auto loss = [&] {
            Tensor y = batch_norm2d(x, g, b, rm, rv, 0.1, 1e-5, true);
            return sum_all(mul(y, y));
        };
        run_case(out, "batch_norm2d", loss, {&px, &pg, &pb}, rng);
    }
    {
        Tensor x = random_tensor({4, 5}, rng, false);
        Tensor g = random_tensor({5}, rng, true);
        Tensor b = random_tensor({5}, rng, false);
        Parameter px{"x", x}, pg{"gamma", g}, pb{"beta", b};
        std::vector<double> rm(5, 0.0), rv(5, 1.0);
        auto loss = [&] {
            Tensor y = batch_norm1d(x, g, b, rm, rv, 0.1, 1e-5, true);
            return sum_all(mul(y, y));
        };
        run_case(out, "batch_norm1d", loss, {&px, &pg, &pb}, rng);
    }
    {
        Tensor f = random_tensor({2, 3, 4, 4}, rng, false);
        Parameter pf{"features", f};
        std::vector<Roi> rois = {
            {0, {0.3, 0.4, 2.1, 1.7}},   // generic
            {0, {1.2, 1.3, 0.4, 0.3}},   // sub-cell
            {1, {-0.5, 2.0, 3.9, 2.5}},  // overhangs the border
        };
        auto loss = [&] {
            Tensor y = roi_align_1x1(f, rois, 2);
            return sum_all(mul(y, y));
        };
        run_case(out, "roi_align_1x1", loss, {&pf}, rng);
    }
    {
        Tensor x = random_tensor({2, 3, 3, 3}, rng, false);
        Parameter px{"x", x};
        auto loss = [&] {
            Tensor y = global_avg_pool(x);
            return sum_all(mul(y, y));
        };
        run_case(out, "global_avg_pool", loss, {&px}, rng);
    }
    {
        Tensor x = random_tensor({3, 5}, rng, true);
        Tensor w = random_tensor({3, 5}, rng, false);
        Parameter px{"x", x};
        auto loss = [&] { return sum_all(mul(l2_normalize(x), w)); };
        run_case(out, "l2_normalize", loss, {&px}, rng);
    }
    {
        Tensor x = random_tensor({4, 3}, rng, false);
        Parameter px{"logits", x};
        std::vector<int> labels = {0, 2, 1, 2};
        auto loss = [&] { return cross_entropy_logits(x, labels); };
        run_case(out, "cross_entropy_logits", loss, {&px}, rng);
    }

    // Full symmetrized loss on a tiny model: every online parameter
    // participates through the augment-free part of the pipeline.
    {
        train::TrainConfig cfg;
        cfg.image_size = 8;
        cfg.encoder_channels = {4, 6};
        cfg.head_hidden = 8;
        cfg.head_out = 4;
        cfg.k = 2;
        cfg.batch = 2;
        cfg.dataset_size = 2;
        cfg.total_epochs = 1;
        cfg.warmup_epochs = 0;
        cfg.seed = seed;
        std::vector<data::SyntheticImage> ds(2);
        Rng img_rng = rng.split(7);
        for (auto& s : ds) {
            s.pixels = Image(8, 8);
            for (double& v : s.pixels.pix) v = img_rng.uniform();
            s.gt.push_back({{1, 1, 4, 4}, 0});
        }
        train::Trainer trainer(cfg, std::move(ds));

        train::PreparedBatch batch;
        batch.v1 = random_tensor({2, 3, 8, 8}, rng, false);
        batch.v2 = random_tensor({2, 3, 8, 8}, rng, false);
        batch.v1.set_requires_grad(false);
        batch.v2.set_requires_grad(false);
        // Feature grid is 2x2; include a sub-cell box.
        batch.rois_v1 = {{0, {0.2, 0.3, 1.1, 1.2}},
                         {0, {0.9, 0.2, 0.4, 0.5}},
                         {1, {0.1, 0.8, 1.5, 0.9}},
                         {1, {0.6, 0.6, 0.7, 0.7}}};
        batch.rois_v2 = {{0, {0.4, 0.1, 1.0, 1.3}},
                         {0, {1.1, 0.5, 0.5, 0.4}},
                         {1, {0.3, 0.4, 1.2, 1.1}},
                         {1, {0.2, 1.0, 0.9, 0.6}}};

        auto named = trainer.pair().online_params();
        std::vector<Parameter> storage;
        storage.reserve(named.size());
        for (auto& p : named) storage.push_back({p.name, p.tensor, true});
        std::vector<Parameter*> params;
        for (auto& p : storage) params.push_back(&p);
        auto loss = [&] { return trainer.symmetrized_loss(batch, true); };
        run_case(out, "scrl_symmetrized_loss", loss, params, rng, 3);
    }

    return out;
}

}  // namespace scrl::nn

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "scrl/trainer.hpp"

using namespace scrl;
using namespace scrl::train;

namespace {

namespace fs = std::filesystem;

TrainConfig tiny_cfg() {
    TrainConfig cfg;
    cfg.image_size = 16;
    cfg.encoder_channels = {4, 6};
    cfg.head_hidden = 8;
    cfg.head_out = 5;
    cfg.k = 3;
    cfg.batch = 4;
    cfg.dataset_size = 8;
    cfg.total_epochs = 2;
    cfg.warmup_epochs = 1;
    cfg.lr0 = 0.1;
    cfg.seed = 7;
    return cfg;
}

std::vector<data::SyntheticImage> tiny_dataset(int n, int size,
                                               uint64_t seed) {
    Rng rng(seed);
    std::vector<data::SyntheticImage> out(n);
    for (int i = 0; i < n; ++i) {
        out[i].pixels = Image(size, size);
        for (double& v : out[i].pixels.pix) v = rng.uniform();
        out[i].gt.push_back({{2, 2, double(size) - 4, double(size) - 4},
                             i % data::kNumClasses});
    }
    return out;
}

nn::Tensor rows2(std::vector<double> d) {
    int cols = int(d.size()) / 2;
    return nn::Tensor::from_data({2, cols}, std::move(d));
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is);
    return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST_CASE("region matching loss identities") {
    SUBCASE("identical rows give zero") {
        nn::Tensor q = rows2({1, 2, 3, -1, 0, 2});
        CHECK(scrl_loss(q, rows2({1, 2, 3, -1, 0, 2})).value() ==
              doctest::Approx(0.0).epsilon(1e-15));
    }
    SUBCASE("antipodal rows give 4") {
        nn::Tensor q = rows2({1, 2, 3, -1, 0, 2});
        nn::Tensor z = rows2({-1, -2, -3, 1, 0, -2});
        CHECK(scrl_loss(q, z).value() == doctest::Approx(4.0).epsilon(1e-12));
    }
    SUBCASE("orthogonal rows give 2") {
        nn::Tensor q = rows2({1, 0, 0, 0, 2, 0});
        nn::Tensor z = rows2({0, 3, 0, 0, 0, 5});
        CHECK(scrl_loss(q, z).value() == doctest::Approx(2.0).epsilon(1e-12));
    }
}

TEST_CASE("symmetrized loss: view relabeling invariance and range") {
    TrainConfig cfg = tiny_cfg();
    Trainer trainer(cfg, tiny_dataset(cfg.dataset_size, cfg.image_size, 3));
    PreparedBatch batch = trainer.prepare_batch({0, 1, 2, 3}, 0);
    CHECK(batch.boxes_per_image > 0.0);
    CHECK(batch.boxes_per_image <= double(cfg.k));

    double l12 = trainer.symmetrized_loss(batch, true).value();
    PreparedBatch swapped;
    swapped.v1 = batch.v2;
    swapped.v2 = batch.v1;
    swapped.rois_v1 = batch.rois_v2;
    swapped.rois_v2 = batch.rois_v1;
    double l21 = trainer.symmetrized_loss(swapped, true).value();
    CHECK(std::fabs(l12 - l21) <= 1e-12);
    CHECK(l12 >= 0.0);
    CHECK(l12 <= 8.0);
}

TEST_CASE("identical views through theta=xi with an identity predictor give zero loss") {
    // Predictor hidden layer wired to the identity: w1 = I with a large
    // positive bias keeps ReLU in its linear region, w2 = I subtracts the
    // bias back out.
    model::ModelSpec spec;
    spec.encoder.input_size = 16;
    spec.encoder.channels = {4, 6};
    spec.projector = {6, 8, 5, true};
    spec.predictor = {5, 5, 5, false};
    Rng rng(21);
    model::SiamesePair pair;
    pair.init(spec, rng);
    {
        std::vector<model::NamedParam> params;
        std::vector<model::NamedBuffer> buffers;
        pair.predictor().collect("p", params, buffers);
        for (auto& p : params) {
            auto& d = p.tensor.data();
            if (p.name == "p.fc1.weight" || p.name == "p.fc2.weight") {
                std::fill(d.begin(), d.end(), 0.0);
                for (int i = 0; i < 5; ++i) d[size_t(i) * 5 + i] = 1.0;
            } else if (p.name == "p.fc1.bias") {
                std::fill(d.begin(), d.end(), 100.0);
            } else {
                std::fill(d.begin(), d.end(), -100.0);
            }
        }
    }
    pair.ema_update(0.0);  // theta = xi exactly

    Rng px(4);
    nn::Tensor v = nn::Tensor::zeros({2, 3, 16, 16});
    for (double& x : v.data()) x = px.uniform();
    std::vector<nn::Roi> rois = {{0, {0.2, 0.3, 2.0, 2.5}},
                                 {1, {1.0, 0.5, 1.5, 2.0}}};

    nn::Tensor f_on = pair.online_encoder().forward_spatial(v, true);
    nn::Tensor f_tg = pair.target_encoder().forward_spatial(v, true);
    nn::Tensor p_on = nn::roi_align_1x1(f_on, rois, 2);
    nn::Tensor p_tg = nn::roi_align_1x1(f_tg, rois, 2);
    auto [z, q] = pair.project_predict(p_on, true);
    nn::Tensor zt = pair.target_projector().forward(p_tg, true).detach();
    CHECK(scrl_loss(q, zt).value() < 1e-9);
}

TEST_CASE("train_step streams are deterministic for a fixed seed") {
    TrainConfig cfg = tiny_cfg();
    Trainer a(cfg, tiny_dataset(cfg.dataset_size, cfg.image_size, 3));
    Trainer b(cfg, tiny_dataset(cfg.dataset_size, cfg.image_size, 3));
    for (int64_t step = 0; step < 3; ++step) {
        StepMetrics ma = a.train_step(step);
        StepMetrics mb = b.train_step(step);
        CHECK(ma.loss == mb.loss);
        CHECK(ma.grad_norm == mb.grad_norm);
        CHECK(ma.embed_std == mb.embed_std);
        CHECK(ma.boxes_per_image == mb.boxes_per_image);
        CHECK(std::isfinite(ma.loss));
        CHECK(ma.loss >= 0.0);
        CHECK(ma.loss <= 8.0);
    }
}

TEST_CASE("backward never touches the target branch") {
    TrainConfig cfg = tiny_cfg();
    Trainer trainer(cfg, tiny_dataset(cfg.dataset_size, cfg.image_size, 3));
    PreparedBatch batch = trainer.prepare_batch({0, 1, 2, 3}, 0);
    auto targets = trainer.pair().target_params();
    std::vector<std::vector<double>> snap;
    for (auto& p : targets) snap.push_back(p.tensor.data());

    nn::Tensor loss = trainer.symmetrized_loss(batch, true);
    loss.backward();
    for (size_t i = 0; i < targets.size(); ++i) {
        CHECK_FALSE(targets[i].tensor.requires_grad());
        CHECK_FALSE(targets[i].tensor.has_grad());
        CHECK(targets[i].tensor.data() == snap[i]);
    }
    // Online parameters did receive gradients.
    int with_grad = 0;
    for (auto& p : trainer.pair().online_params())
        if (p.tensor.has_grad()) ++with_grad;
    CHECK(with_grad > 0);
}

TEST_CASE("schedule boundaries") {
    ScheduleConfig s{0.4, 0.97, 10, 100};
    CHECK(lr_at(s, 0) == 0.0);
    CHECK(lr_at(s, 10) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(lr_at(s, 100) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(tau_at(s, 0) == doctest::Approx(0.97).epsilon(1e-12));
    CHECK(tau_at(s, 100) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(lr_at(s, 101), std::out_of_range);
}

TEST_CASE("LARS single-layer closed form and zero-gradient fixpoint") {
    OptimConfig oc;
    oc.kind = OptimizerKind::Lars;
    oc.momentum = 0.0;
    oc.weight_decay = 0.0;
    nn::Tensor w = nn::Tensor::from_data({1, 1}, {2.0}, true);
    std::vector<model::NamedParam> params = {{"w", w}};
    Optimizer opt(oc, params);

    w.node()->ensure_grad();
    w.grad()[0] = 0.5;
    opt.step(params, 0.1);
    double local_lr = 0.1 * oc.trust_coeff * 2.0 / (0.5 + oc.eps);
    CHECK(w.data()[0] == doctest::Approx(2.0 - local_lr * 0.5).epsilon(1e-12));

    double before = w.data()[0];
    w.node()->ensure_grad();
    w.grad()[0] = 0.0;
    opt.step(params, 0.1);
    CHECK(w.data()[0] == before);
}

TEST_CASE("global pooling mode skips the region machinery") {
    TrainConfig cfg = tiny_cfg();
    cfg.mode = TrainMode::GlobalByol;
    Trainer trainer(cfg, tiny_dataset(cfg.dataset_size, cfg.image_size, 3));
    StepMetrics m = trainer.train_step(0);
    CHECK(m.boxes_per_image == 0.0);
    CHECK(std::isfinite(m.loss));
    CHECK(m.loss >= 0.0);
    CHECK(m.loss <= 8.0);
}

TEST_CASE("run writes metrics, manifest and a loadable checkpoint") {
    TrainConfig cfg = tiny_cfg();
    fs::path dir = fs::temp_directory_path() / "scrl_run_test";
    fs::remove_all(dir);
    Trainer trainer(cfg, tiny_dataset(cfg.dataset_size, cfg.image_size, 3));
    trainer.run(dir.string());

    std::string metrics = slurp(dir / "metrics.csv");
    int64_t rows = std::count(metrics.begin(), metrics.end(), '\n');
    CHECK(rows == cfg.total_steps() + 1);  // header + one row per step
    CHECK(metrics.rfind("step,loss,lr,tau,boxes_per_image,grad_norm,embed_std",
                        0) == 0);
    std::string manifest = slurp(dir / "run.json");
    CHECK(manifest.find("\"status\": \"complete\"") != std::string::npos);
    Checkpoint ckpt = load_checkpoint((dir / "checkpoint.bin").string());
    CHECK(ckpt.find("online.encoder.stage0.conv.weight") != nullptr);
    CHECK(fs::exists(dir / "loss_curve.png"));
    fs::remove_all(dir);
}

TEST_CASE("resume from a mid-run checkpoint reproduces the final checkpoint") {
    TrainConfig cfg = tiny_cfg();
    fs::path base = fs::temp_directory_path() / "scrl_resume_test";
    fs::remove_all(base);

    Trainer full(cfg, tiny_dataset(cfg.dataset_size, cfg.image_size, 3));
    full.run((base / "full").string());

    TrainConfig cfg_ckpt = cfg;
    cfg_ckpt.checkpoint_every_epochs = 1;
    Trainer first(cfg_ckpt, tiny_dataset(cfg.dataset_size, cfg.image_size, 3));
    first.run((base / "first").string());

    Trainer resumed(cfg, tiny_dataset(cfg.dataset_size, cfg.image_size, 3));
    int64_t step = resumed.load_checkpoint_for_resume(
        (base / "first" / "checkpoint_epoch1.bin").string());
    CHECK(step == cfg.steps_per_epoch());
    resumed.run((base / "resumed").string());

    CHECK(slurp(base / "resumed" / "checkpoint.bin") ==
          slurp(base / "full" / "checkpoint.bin"));
    fs::remove_all(base);
}

TEST_CASE("config round trip and rejection of bad input") {
    TrainConfig cfg = tiny_cfg();
    cfg.iou_thr = std::nullopt;
    cfg.jitter = std::numeric_limits<double>::infinity();
    TrainConfig back = TrainConfig::from_string(cfg.to_file_string());
    CHECK(back.to_file_string() == cfg.to_file_string());
    CHECK_FALSE(back.iou_thr.has_value());
    CHECK(std::isinf(back.jitter));

    CHECK_THROWS_AS(TrainConfig::from_string("bogus_key = 1"),
                    std::invalid_argument);
    CHECK_THROWS_AS(TrainConfig::from_string("batch = 1"),
                    std::invalid_argument);
    CHECK_THROWS_AS(TrainConfig::from_string("mode = vicreg"),
                    std::invalid_argument);
}

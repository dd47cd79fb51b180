#include "scrl/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "scrl/plot.hpp"

namespace scrl::train {

std::atomic<bool> g_interrupt{false};

namespace {

// Key-space prefixes for derived RNG streams so the model, the epoch
// shuffles and the per-image augmentation never share a stream.
constexpr uint64_t kStreamModel = 0x01ull << 56;
constexpr uint64_t kStreamShuffle = 0x02ull << 56;
constexpr uint64_t kStreamImage = 0x03ull << 56;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double column_std_mean(const std::vector<double>& rows, int n, int d) {
    // Mean over dimensions of the per-dimension std across rows.
    if (n < 2) return 0.0;
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
        double m = 0.0;
        for (int i = 0; i < n; ++i) m += rows[size_t(i) * d + j];
        m /= n;
        double s2 = 0.0;
        for (int i = 0; i < n; ++i) {
            double e = rows[size_t(i) * d + j] - m;
            s2 += e * e;
        }
        acc += std::sqrt(s2 / n);
    }
    return acc / d;
}

}  // namespace

model::ModelSpec model_spec_from(const TrainConfig& cfg) {
    model::ModelSpec spec;
    spec.encoder.input_size = cfg.image_size;
    spec.encoder.channels = cfg.encoder_channels;
    spec.projector = {spec.encoder.out_channels(), cfg.head_hidden,
                      cfg.head_out, true};
    spec.predictor = {cfg.head_out, cfg.head_hidden, cfg.head_out, true};
    return spec;
}

nn::Tensor scrl_loss(const nn::Tensor& q1, const nn::Tensor& z2) {
    if (q1.ndim() != 2 || z2.ndim() != 2 || q1.shape() != z2.shape())
        throw nn::ShapeError("scrl_loss: expected matching [R,D] inputs");
    int rows = q1.dim(0);
    nn::Tensor d = nn::sub(nn::l2_normalize(q1), nn::l2_normalize(z2));
    return nn::scale(nn::sum_all(nn::mul(d, d)), 1.0 / rows);
}

Trainer::Trainer(TrainConfig cfg, std::vector<data::SyntheticImage> dataset)
    : cfg_(std::move(cfg)),
      dataset_(std::move(dataset)),
      run_rng_(cfg_.seed),
      aug1_(data::AugmentParams::view1(cfg_.image_size)),
      aug2_(data::AugmentParams::view2(cfg_.image_size)) {
    cfg_.validate();
    if (int(dataset_.size()) != cfg_.dataset_size)
        throw std::invalid_argument("Trainer: dataset size does not match config");
    Rng model_rng = run_rng_.split(kStreamModel);
    pair_.init(model_spec_from(cfg_), model_rng);
    OptimConfig oc;
    oc.kind = optimizer_kind_from_string(cfg_.optimizer);
    oc.momentum = cfg_.momentum;
    oc.weight_decay = cfg_.weight_decay;
    oc.trust_coeff = cfg_.trust_coeff;
    optimizer_ = Optimizer(oc, pair_.online_params());
}

ScheduleConfig Trainer::schedule() const {
    return {cfg_.lr0, cfg_.tau0, cfg_.warmup_epochs * cfg_.steps_per_epoch(),
            cfg_.total_steps()};
}

std::vector<int> Trainer::draw_batch_indices(int64_t step) {
    int64_t spe = cfg_.steps_per_epoch();
    int64_t epoch = step / spe;
    int64_t slot = step % spe;
    std::vector<int> perm(dataset_.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng shuffle_rng = run_rng_.split(kStreamShuffle | uint64_t(epoch));
    for (size_t i = perm.size() - 1; i > 0; --i)
        std::swap(perm[i], perm[shuffle_rng.uniform_int(i + 1)]);
    return {perm.begin() + slot * cfg_.batch,
            perm.begin() + (slot + 1) * cfg_.batch};
}

PreparedBatch Trainer::prepare_batch(const std::vector<int>& indices,
                                     int64_t step) {
    PreparedBatch out;
    geom::FeatureGridSpec grid = pair_.online_encoder().spec().grid();
    std::vector<const Image*> kept1, kept2;
    std::vector<Image> store1, store2;
    store1.reserve(indices.size());
    store2.reserve(indices.size());
    int total_boxes = 0;

    for (size_t slot = 0; slot < indices.size(); ++slot) {
        const Image& img = dataset_.at(indices[slot]).pixels;
        Rng img_rng = run_rng_.split(
            kStreamImage | (uint64_t(step) * uint64_t(cfg_.batch) + slot));

        bool accepted = false;
        for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
            data::AugmentedView v1 = data::sample_view(img, aug1_, img_rng);
            data::AugmentedView v2 = data::sample_view(img, aug2_, img_rng);

            if (cfg_.mode == TrainMode::GlobalByol) {
                store1.push_back(std::move(v1.pixels));
                store2.push_back(std::move(v2.pixels));
                accepted = true;
                break;
            }

            auto is = geom::intersect_views(v1.geometry, v2.geometry);
            if (!is) continue;
            // Smallest source box that still spans one feature cell in
            // both views (the view with the coarser effective stride wins).
            double min_w = std::max(
                grid.min_box_w() * v1.geometry.crop.w / v1.geometry.out_w,
                grid.min_box_w() * v2.geometry.crop.w / v2.geometry.out_w);
            double min_h = std::max(
                grid.min_box_h() * v1.geometry.crop.h / v1.geometry.out_h,
                grid.min_box_h() * v2.geometry.crop.h / v2.geometry.out_h);
            if (is->width() < min_w || is->height() < min_h) continue;

            geom::RoiSample rois;
            try {
                rois = geom::sample_rois(*is, cfg_.k, cfg_.iou_thr, min_w,
                                         min_h, 100 * cfg_.k, img_rng);
            } catch (const geom::GeometryError&) {
                continue;
            }

            int batch_index = int(store1.size());
            for (const geom::Box& b : rois.boxes) {
                geom::Box b1 = geom::map_box_to_view(b, v1.geometry);
                geom::Box b2 = geom::map_box_to_view(b, v2.geometry);
                if (cfg_.jitter > 0.0) {
                    geom::Box bounds1 =
                        geom::map_box_to_view(is->rect, v1.geometry);
                    geom::Box bounds2 =
                        geom::map_box_to_view(is->rect, v2.geometry);
                    b1 = geom::jitter_box(b1, cfg_.jitter, bounds1, img_rng);
                    b2 = geom::jitter_box(b2, cfg_.jitter, bounds2, img_rng);
                }
                out.rois_v1.push_back(
                    {batch_index, geom::map_box_to_grid(b1, grid)});
                out.rois_v2.push_back(
                    {batch_index, geom::map_box_to_grid(b2, grid)});
            }
            total_boxes += int(rois.boxes.size());
            store1.push_back(std::move(v1.pixels));
            store2.push_back(std::move(v2.pixels));
            accepted = true;
        }
        if (!accepted) ++out.skipped_images;
    }

    if (store1.size() < 2)
        throw NumericError("prepare_batch: fewer than 2 usable images");
    for (const Image& im : store1) kept1.push_back(&im);
    for (const Image& im : store2) kept2.push_back(&im);
    out.v1 = data::images_to_tensor(kept1);
    out.v2 = data::images_to_tensor(kept2);
    out.boxes_per_image = double(total_boxes) / double(store1.size());
    return out;
}

nn::Tensor Trainer::symmetrized_loss(const PreparedBatch& batch, bool training,
                                     double* embed_std_out) {
    bool roi_mode = cfg_.mode == TrainMode::Scrl;
    nn::Tensor f1 = pair_.online_encoder().forward_spatial(batch.v1, training);
    nn::Tensor f2 = pair_.online_encoder().forward_spatial(batch.v2, training);
    nn::Tensor t1 = pair_.target_encoder().forward_spatial(batch.v1, training);
    nn::Tensor t2 = pair_.target_encoder().forward_spatial(batch.v2, training);

    auto pool = [&](const nn::Tensor& f, const std::vector<nn::Roi>& rois) {
        return roi_mode ? nn::roi_align_1x1(f, rois, cfg_.sampling_ratio)
                        : nn::global_avg_pool(f);
    };
    nn::Tensor p1 = pool(f1, batch.rois_v1);
    nn::Tensor p2 = pool(f2, batch.rois_v2);
    nn::Tensor pt1 = pool(t1, batch.rois_v1);
    nn::Tensor pt2 = pool(t2, batch.rois_v2);

    auto [z1, q1] = pair_.project_predict(p1, training);
    auto [z2, q2] = pair_.project_predict(p2, training);
    (void)z1;
    (void)z2;
    nn::Tensor zt1 = pair_.target_projector().forward(pt1, training).detach();
    nn::Tensor zt2 = pair_.target_projector().forward(pt2, training).detach();

    if (embed_std_out) {
        nn::Tensor zn = nn::l2_normalize(zt2);
        *embed_std_out =
            column_std_mean(zn.data(), zn.dim(0), zn.dim(1));
    }
    return nn::add(scrl_loss(q1, zt2), scrl_loss(q2, zt1));
}

StepMetrics Trainer::train_step(int64_t step) {
    StepMetrics m;
    m.step = step;
    ScheduleConfig sched = schedule();
    m.lr = lr_at(sched, step);
    m.tau = tau_at(sched, step);

    PreparedBatch batch = prepare_batch(draw_batch_indices(step), step);
    m.boxes_per_image = batch.boxes_per_image;

    nn::Tensor loss = symmetrized_loss(batch, true, &m.embed_std);
    m.loss = loss.value();
    if (!std::isfinite(m.loss))
        throw NumericError("non-finite loss at step " + std::to_string(step) +
                           " (lr=" + fmt17(m.lr) + ")");
    loss.backward();
    auto params = pair_.online_params();
    m.grad_norm = optimizer_.step(params, m.lr);
    if (!std::isfinite(m.grad_norm))
        throw NumericError("non-finite gradient norm at step " +
                           std::to_string(step));
    pair_.ema_update(m.tau);
    return m;
}

void Trainer::run(const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string metrics_path = out_dir + "/metrics.csv";
    const std::string manifest_path = out_dir + "/run.json";
    const std::string ckpt_path = out_dir + "/checkpoint.bin";
    bool resuming = start_step_ > 0;

    auto write_manifest = [&](const std::string& status, double final_loss,
                              const std::string& ckpt_hash) {
        nlohmann::json j;
        j["format_version"] = 1;
        j["status"] = status;
        j["config"] = nlohmann::json::parse(cfg_.to_json());
        j["model"] = nlohmann::json::parse(pair_.spec().to_json());
        j["steps_per_epoch"] = cfg_.steps_per_epoch();
        j["total_steps"] = cfg_.total_steps();
        j["metrics"] = "metrics.csv";
        j["checkpoint"] = "checkpoint.bin";
        if (status == "complete") {
            j["final_loss"] = final_loss;
            j["checkpoint_hash"] = ckpt_hash;
        }
        std::string tmp = manifest_path + ".tmp";
        std::ofstream(tmp) << j.dump(2) << "\n";
        fs::rename(tmp, manifest_path);
    };
    write_manifest("running", 0.0, "");

    std::ofstream metrics(metrics_path, resuming ? std::ios::app
                                                 : std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot open " + metrics_path);
    if (!resuming)
        metrics << "step,loss,lr,tau,boxes_per_image,grad_norm,embed_std\n";

    bool log = std::getenv("SCRL_LOG") != nullptr;
    int64_t spe = cfg_.steps_per_epoch();
    int64_t total = cfg_.total_steps();
    std::vector<double> losses;
    double last_loss = 0.0;

    for (int64_t step = start_step_; step < total; ++step) {
        if (g_interrupt.load()) {
            metrics.flush();
            save_checkpoint(ckpt_path, step);
            write_manifest("interrupted", last_loss, "");
            return;
        }
        StepMetrics m = train_step(step);
        last_loss = m.loss;
        losses.push_back(m.loss);
        metrics << m.step << ',' << fmt17(m.loss) << ',' << fmt17(m.lr) << ','
                << fmt17(m.tau) << ',' << fmt17(m.boxes_per_image) << ','
                << fmt17(m.grad_norm) << ',' << fmt17(m.embed_std) << '\n';
        bool epoch_end = (step + 1) % spe == 0;
        if (epoch_end) {
            metrics.flush();
            int64_t epoch = (step + 1) / spe;
            if (log)
                std::fprintf(stderr,
                             "[scrl] epoch %lld/%d loss %.4f lr %.4f tau %.4f\n",
                             (long long)epoch, cfg_.total_epochs, m.loss, m.lr,
                             m.tau);
            if (cfg_.checkpoint_every_epochs > 0 &&
                epoch % cfg_.checkpoint_every_epochs == 0 && step + 1 < total)
                save_checkpoint(out_dir + "/checkpoint_epoch" +
                                    std::to_string(epoch) + ".bin",
                                step + 1);
        }
    }
    metrics.flush();

    save_checkpoint(ckpt_path, total);
    std::string hash = checkpoint_content_hash(load_checkpoint(ckpt_path));
    plot::write_loss_curve(out_dir + "/loss_curve.png", losses);
    write_manifest("complete", last_loss, hash);
}

void Trainer::save_checkpoint(const std::string& path, int64_t step) const {
    Checkpoint c;
    nlohmann::json meta;
    meta["format_version"] = 1;
    meta["step"] = step;
    meta["config"] = nlohmann::json::parse(cfg_.to_json());
    meta["model"] = nlohmann::json::parse(pair_.spec().to_json());
    c.metadata_json = meta.dump();
    const_cast<model::SiamesePair&>(pair_).save(c);
    const auto& vel = optimizer_.velocity();
    for (size_t i = 0; i < vel.size(); ++i)
        c.add("optim.v." + std::to_string(i), {int(vel[i].size())}, vel[i]);
    scrl::save_checkpoint(path, c);
}

int64_t Trainer::load_checkpoint_for_resume(const std::string& path) {
    Checkpoint c = scrl::load_checkpoint(path);
    nlohmann::json meta = nlohmann::json::parse(c.metadata_json);
    pair_.load(c);
    std::vector<std::vector<double>> vel;
    for (size_t i = 0;; ++i) {
        const CheckpointRecord* r = c.find("optim.v." + std::to_string(i));
        if (!r) break;
        vel.push_back(r->data);
    }
    if (!vel.empty()) optimizer_.set_velocity(std::move(vel));
    start_step_ = meta.at("step").get<int64_t>();
    return start_step_;
}

}  // namespace scrl::train

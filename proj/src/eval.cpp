#include "scrl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "scrl/checkpoint.hpp"
#include "scrl/ops.hpp"
#include "scrl/optim.hpp"
#include "scrl/rng.hpp"

namespace scrl::eval {

namespace {

struct Example {
    std::vector<double> feat;
    int label = 0;
};

int image_label(const data::SyntheticImage& img) {
    // Class of the largest ground-truth box.
    if (img.gt.empty())
        throw std::invalid_argument("eval: image without ground-truth boxes");
    const data::GtBox* best = &img.gt[0];
    for (const auto& g : img.gt)
        if (g.box.area() > best->box.area()) best = &g;
    return best->class_id;
}

// Runs the frozen encoder over `images` and pools either every GT box
// (roi=true; one example per box) or the whole map (roi=false; one
// example per image, labeled by its largest box).
std::vector<Example> extract(model::Encoder& enc,
                             const std::vector<const data::SyntheticImage*>& images,
                             bool roi, bool training_bn, int batch,
                             int sampling_ratio) {
    std::vector<Example> out;
    geom::FeatureGridSpec grid = enc.spec().grid();
    for (size_t start = 0; start < images.size(); start += size_t(batch)) {
        size_t stop = std::min(images.size(), start + size_t(batch));
        if (training_bn && stop - start < 2) break;  // BN needs a real batch
        std::vector<const Image*> pix;
        for (size_t i = start; i < stop; ++i)
            pix.push_back(&images[i]->pixels);
        nn::Tensor f = enc.forward_spatial(data::images_to_tensor(pix),
                                           training_bn);
        if (training_bn) continue;  // stats pass only, features discarded

        nn::Tensor pooled;
        std::vector<int> labels;
        if (roi) {
            std::vector<nn::Roi> rois;
            for (size_t i = start; i < stop; ++i) {
                const auto& gt = images[i]->gt;
                if (gt.empty())
                    throw std::invalid_argument(
                        "eval: image without ground-truth boxes");
                for (const auto& g : gt) {
                    rois.push_back({int(i - start),
                                    geom::map_box_to_grid(g.box, grid)});
                    labels.push_back(g.class_id);
                }
            }
            pooled = nn::roi_align_1x1(f, rois, sampling_ratio);
        } else {
            pooled = nn::global_avg_pool(f);
            for (size_t i = start; i < stop; ++i)
                labels.push_back(image_label(*images[i]));
        }
        int d = pooled.dim(1);
        const auto& data = pooled.data();
        for (int r = 0; r < pooled.dim(0); ++r)
            out.push_back({{data.begin() + size_t(r) * d,
                            data.begin() + size_t(r + 1) * d},
                           labels[r]});
    }
    return out;
}

EvalReport linear_probe(model::Encoder& backbone,
                        const std::vector<data::SyntheticImage>& dataset,
                        const EvalConfig& cfg, bool roi) {
    if (dataset.empty())
        throw std::invalid_argument("eval: empty dataset");
    std::string hash_before = encoder_param_hash(backbone);

    size_t n_train = size_t(double(dataset.size()) * cfg.train_fraction);
    n_train = std::clamp<size_t>(n_train, 1, dataset.size() - 1);
    std::vector<const data::SyntheticImage*> train_imgs, test_imgs;
    for (size_t i = 0; i < dataset.size(); ++i)
        (i < n_train ? train_imgs : test_imgs).push_back(&dataset[i]);

    // Fresh running statistics for this input distribution, tracked on
    // the probe's training split, then frozen for feature extraction.
    backbone.reset_bn_stats();
    for (int pass = 0; pass < cfg.bn_track_passes; ++pass)
        extract(backbone, train_imgs, roi, true, cfg.extract_batch,
                cfg.sampling_ratio);
    std::vector<Example> train = extract(backbone, train_imgs, roi, false,
                                         cfg.extract_batch, cfg.sampling_ratio);
    std::vector<Example> test = extract(backbone, test_imgs, roi, false,
                                        cfg.extract_batch, cfg.sampling_ratio);
    if (train.empty() || test.empty())
        throw std::invalid_argument("eval: not enough labeled examples");

    int d = int(train[0].feat.size());
    nn::Tensor w = nn::Tensor::zeros({data::kNumClasses, d}, true);
    nn::Tensor b = nn::Tensor::zeros({data::kNumClasses}, true);
    std::vector<model::NamedParam> params = {{"head.weight", w},
                                             {"head.bias", b}};
    train::OptimConfig oc;
    oc.weight_decay = 0.0;
    train::Optimizer opt(oc, params);

    int64_t steps_per_epoch =
        std::max<int64_t>(1, int64_t(train.size()) / cfg.batch);
    train::ScheduleConfig sched{cfg.lr0, 0.0,
                                cfg.warmup_epochs * steps_per_epoch,
                                cfg.epochs * steps_per_epoch};

    Rng rng(cfg.seed ^ 0x5eedf00dULL);
    std::vector<int> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    for (int64_t step = 0; step < sched.total_steps; ++step) {
        if (step % steps_per_epoch == 0)
            for (size_t i = order.size() - 1; i > 0; --i)
                std::swap(order[i], order[rng.uniform_int(i + 1)]);
        size_t off = size_t(step % steps_per_epoch) * cfg.batch;
        size_t cnt = std::min<size_t>(cfg.batch, train.size() - off);
        std::vector<double> xs(cnt * d);
        std::vector<int> ys(cnt);
        for (size_t i = 0; i < cnt; ++i) {
            const Example& ex = train[order[off + i]];
            std::copy(ex.feat.begin(), ex.feat.end(), xs.begin() + i * d);
            ys[i] = ex.label;
        }
        nn::Tensor x = nn::Tensor::from_data({int(cnt), d}, std::move(xs));
        nn::Tensor loss = nn::cross_entropy_logits(nn::linear(x, w, b), ys);
        loss.backward();
        opt.step(params, train::lr_at(sched, step));
    }

    EvalReport rep;
    rep.protocol = roi ? "roi" : "global";
    rep.train_examples = int(train.size());
    rep.test_examples = int(test.size());
    rep.per_class_accuracy.assign(data::kNumClasses, 0.0);
    std::vector<int> per_class_total(data::kNumClasses, 0);
    int correct = 0;
    const auto& wd = w.data();
    const auto& bd = b.data();
    for (const Example& ex : test) {
        int best = 0;
        double best_v = -1e300;
        for (int k = 0; k < data::kNumClasses; ++k) {
            double v = bd[k];
            for (int j = 0; j < d; ++j) v += wd[size_t(k) * d + j] * ex.feat[j];
            if (v > best_v) {
                best_v = v;
                best = k;
            }
        }
        ++per_class_total[ex.label];
        if (best == ex.label) {
            ++correct;
            rep.per_class_accuracy[ex.label] += 1.0;
        }
    }
    rep.accuracy = double(correct) / double(test.size());
    for (int k = 0; k < data::kNumClasses; ++k)
        if (per_class_total[k] > 0) rep.per_class_accuracy[k] /= per_class_total[k];

    std::string hash_after = encoder_param_hash(backbone);
    if (hash_after != hash_before)
        throw std::logic_error("eval: backbone parameters changed during probe");
    rep.backbone_hash = hash_after;
    rep.frozen = true;
    return rep;
}

}  // namespace

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["protocol"] = protocol;
    j["accuracy"] = accuracy;
    j["per_class_accuracy"] = per_class_accuracy;
    j["backbone_hash"] = backbone_hash;
    j["frozen"] = frozen;
    j["train_examples"] = train_examples;
    j["test_examples"] = test_examples;
    return j.dump(2);
}

std::string CollapseReport::to_json() const {
    nlohmann::json j;
    j["embed_std"] = embed_std;
    j["mean_cosine"] = mean_cosine;
    j["cosine_hist"] = cosine_hist;
    return j.dump(2);
}

EvalReport roi_linear_eval(model::Encoder& backbone,
                           const std::vector<data::SyntheticImage>& dataset,
                           const EvalConfig& cfg) {
    return linear_probe(backbone, dataset, cfg, true);
}

EvalReport global_linear_eval(model::Encoder& backbone,
                              const std::vector<data::SyntheticImage>& dataset,
                              const EvalConfig& cfg) {
    return linear_probe(backbone, dataset, cfg, false);
}

CollapseReport collapse_probe(model::SiamesePair& pair,
                              const std::vector<data::SyntheticImage>& dataset) {
    size_t n = std::min<size_t>(dataset.size(), 256);
    if (n < 2) throw std::invalid_argument("collapse_probe: need >= 2 images");
    std::vector<const Image*> pix;
    for (size_t i = 0; i < n; ++i) pix.push_back(&dataset[i].pixels);
    nn::Tensor f =
        pair.target_encoder().forward_spatial(data::images_to_tensor(pix), false);
    nn::Tensor z = pair.target_projector().forward(nn::global_avg_pool(f), false);
    nn::Tensor zn = nn::l2_normalize(z);

    CollapseReport rep;
    int d = zn.dim(1);
    const auto& v = zn.data();
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
        double m = 0.0;
        for (size_t i = 0; i < n; ++i) m += v[i * d + j];
        m /= double(n);
        double s2 = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double e = v[i * d + j] - m;
            s2 += e * e;
        }
        acc += std::sqrt(s2 / double(n));
    }
    rep.embed_std = acc / d;

    rep.cosine_hist.assign(20, 0);
    double cos_sum = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double c = 0.0;
            for (int k = 0; k < d; ++k) c += v[i * d + k] * v[j * d + k];
            cos_sum += c;
            ++pairs;
            int bin = std::clamp(int((c + 1.0) * 10.0), 0, 19);
            ++rep.cosine_hist[bin];
        }
    rep.mean_cosine = cos_sum / double(pairs);
    return rep;
}

model::SiamesePair load_pair_checkpoint(const std::string& path) {
    Checkpoint c = load_checkpoint(path);
    nlohmann::json meta = nlohmann::json::parse(c.metadata_json);
    model::ModelSpec spec = model::ModelSpec::from_json(meta.at("model").dump());
    model::SiamesePair pair;
    Rng rng(0);
    pair.init(spec, rng);
    pair.load(c);
    return pair;
}

std::string encoder_param_hash(model::Encoder& enc) {
    std::vector<model::NamedParam> params;
    std::vector<model::NamedBuffer> buffers;
    enc.collect("encoder", params, buffers);
    Checkpoint c;
    for (auto& p : params)
        c.add(p.name, p.tensor.shape(), p.tensor.data());
    return checkpoint_content_hash(c);
}

}  // namespace scrl::eval

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "CLI11.hpp"
#include "json.hpp"
#include "scrl/augment.hpp"
#include "scrl/dataset.hpp"
#include "scrl/eval.hpp"
#include "scrl/gradsuite.hpp"
#include "scrl/plot.hpp"
#include "scrl/report.hpp"
#include "scrl/trainer.hpp"

namespace fs = std::filesystem;
using namespace scrl;

namespace {

void handle_sigint(int) { train::g_interrupt.store(true); }

uint64_t resolve_seed(bool given, uint64_t value, const char* what) {
    if (given) return value;
    std::random_device rd;
    uint64_t s = (uint64_t(rd()) << 32) | rd();
    std::fprintf(stderr, "[scrl] %s: no --seed given, using %llu\n", what,
                 (unsigned long long)s);
    return s;
}

std::vector<data::SyntheticImage> load_dumped_dataset(const std::string& dir) {
    std::ifstream gt(fs::path(dir) / "gt.jsonl");
    if (!gt)
        throw std::runtime_error("cannot open " + dir +
                                 "/gt.jsonl (expected a `scrl dataset` dump)");
    std::vector<data::SyntheticImage> out;
    std::string line;
    while (std::getline(gt, line)) {
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line);
        data::SyntheticImage img;
        img.pixels =
            read_ppm((fs::path(dir) / rec.at("path").get<std::string>()).string());
        auto boxes = rec.at("boxes");
        auto classes = rec.at("classes");
        for (size_t i = 0; i < boxes.size(); ++i)
            img.gt.push_back({{boxes[i][0].get<double>(),
                               boxes[i][1].get<double>(),
                               boxes[i][2].get<double>(),
                               boxes[i][3].get<double>()},
                              classes[i].get<int>()});
        out.push_back(std::move(img));
    }
    if (out.empty()) throw std::runtime_error("dataset dump is empty: " + dir);
    return out;
}

int cmd_train(const std::string& config_path, const std::string& out,
              bool seed_given, uint64_t seed, const std::string& resume) {
    train::TrainConfig cfg = train::TrainConfig::from_file(config_path);
    if (seed_given) cfg.seed = seed;
    auto dataset = data::generate_dataset({cfg.image_size, 1, 4, 12.0, 28.0},
                                          cfg.dataset_size, cfg.seed ^ 0xda7aULL);
    train::Trainer trainer(cfg, std::move(dataset));
    if (!resume.empty()) {
        int64_t step = trainer.load_checkpoint_for_resume(resume);
        std::fprintf(stderr, "[scrl] resuming from %s at step %lld\n",
                     resume.c_str(), (long long)step);
    }
    std::signal(SIGINT, handle_sigint);
    trainer.run(out);
    return 0;
}

int cmd_eval(const std::string& protocol, const std::string& ckpt,
             const std::string& data_dir, std::string out, bool seed_given,
             uint64_t seed, int epochs, double lr) {
    model::SiamesePair pair = eval::load_pair_checkpoint(ckpt);
    auto dataset = load_dumped_dataset(data_dir);
    eval::EvalConfig ecfg;
    ecfg.seed = resolve_seed(seed_given, seed, "eval");
    ecfg.epochs = epochs;
    ecfg.lr0 = lr;
    eval::EvalReport rep =
        protocol == "roi"
            ? eval::roi_linear_eval(pair.online_encoder(), dataset, ecfg)
            : eval::global_linear_eval(pair.online_encoder(), dataset, ecfg);
    if (out.empty()) out = fs::path(ckpt).parent_path().string();
    if (out.empty()) out = ".";
    fs::create_directories(out);
    std::ofstream(fs::path(out) / ("eval_" + protocol + ".json"))
        << rep.to_json() << "\n";
    eval::CollapseReport collapse = eval::collapse_probe(pair, dataset);
    std::ofstream(fs::path(out) / "collapse.json") << collapse.to_json() << "\n";
    std::printf("%s linear probe: accuracy %.4f (%d train / %d test examples)\n",
                protocol.c_str(), rep.accuracy, rep.train_examples,
                rep.test_examples);
    std::printf("embedding std %.4f, mean pairwise cosine %.4f\n",
                collapse.embed_std, collapse.mean_cosine);
    return 0;
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& out,
               const std::string& downstream) {
    report::ReportResult res = report::ablation_report(dirs, downstream);
    for (const auto& w : res.warnings)
        std::fprintf(stderr, "[scrl] warning: %s\n", w.c_str());
    fs::create_directories(out);
    std::ofstream(fs::path(out) / "table.md") << res.markdown;
    std::ofstream(fs::path(out) / "table.csv") << res.csv;
    if (!res.run_names.empty())
        plot::write_bar_chart((fs::path(out) / "accuracy_bars.png").string(),
                              res.run_names, res.roi_accuracies,
                              "roi probe accuracy");
    std::fputs(res.markdown.c_str(), stdout);
    return 0;
}

int cmd_gradcheck(bool seed_given, uint64_t seed) {
    nn::SuiteResult res =
        nn::run_gradient_suite(resolve_seed(seed_given, seed, "gradcheck"));
    for (const auto& c : res.cases)
        std::printf("%-24s max rel error %.3e\n", c.name.c_str(),
                    c.max_rel_error);
    bool ok = res.passed(1e-4);
    std::printf("gradient suite: %s (worst %.3e, tolerance 1e-04)\n",
                ok ? "PASS" : "FAIL", res.worst());
    return ok ? 0 : 2;
}

// Renders matched region pairs: for each sample, the two augmented views
// with each RoI pair outlined in the same color in both images.
int cmd_geom_check(bool seed_given, uint64_t seed, const std::string& out,
                   int samples) {
    fs::create_directories(out);
    Rng rng(resolve_seed(seed_given, seed, "geom-check"));
    const double palette[6][3] = {{1, 0, 0}, {0, 1, 0},   {0.2, 0.4, 1},
                                  {1, 1, 0}, {1, 0.4, 1}, {0, 1, 1}};
    data::SceneConfig scene;
    auto p1 = data::AugmentParams::view1(64);
    auto p2 = data::AugmentParams::view2(64);
    for (int s = 0; s < samples; ++s) {
        Rng img_rng = rng.split(s);
        data::SyntheticImage img = data::generate_image(scene, img_rng);
        for (int attempt = 0;; ++attempt) {
            data::AugmentedView v1 = data::sample_view(img.pixels, p1, img_rng);
            data::AugmentedView v2 = data::sample_view(img.pixels, p2, img_rng);
            auto is = geom::intersect_views(v1.geometry, v2.geometry);
            if (!is || (is->width() < 8 || is->height() < 8)) {
                if (attempt > 50)
                    throw std::runtime_error("geom-check: no usable overlap");
                continue;
            }
            geom::RoiSample rois =
                geom::sample_rois(*is, 6, 0.5, 4.0, 4.0, 600, img_rng);
            for (size_t i = 0; i < rois.boxes.size(); ++i) {
                const double* c = palette[i % 6];
                draw_box(v1.pixels,
                         geom::map_box_to_view(rois.boxes[i], v1.geometry),
                         c[0], c[1], c[2]);
                draw_box(v2.pixels,
                         geom::map_box_to_view(rois.boxes[i], v2.geometry),
                         c[0], c[1], c[2]);
            }
            char name[64];
            std::snprintf(name, sizeof(name), "sample%02d_view1.ppm", s);
            write_ppm((fs::path(out) / name).string(), v1.pixels);
            std::snprintf(name, sizeof(name), "sample%02d_view2.ppm", s);
            write_ppm((fs::path(out) / name).string(), v2.pixels);
            break;
        }
    }
    std::printf("wrote %d annotated view pairs to %s\n", samples, out.c_str());
    return 0;
}

int cmd_dataset(bool seed_given, uint64_t seed, const std::string& out,
                int count, int size) {
    auto ds = data::generate_dataset({size, 1, 4, 12.0, 28.0}, count,
                                     resolve_seed(seed_given, seed, "dataset"));
    data::dump_dataset(out, ds);
    std::printf("wrote %d images to %s\n", count, out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SCRL: self-supervised pretraining with spatially matched "
                 "regions, plus linear-probe evaluation"};
    app.require_subcommand(1);

    std::string config_path, out_dir, resume, data_dir, ckpt_path;
    std::string protocol = "roi", downstream;
    std::vector<std::string> run_dirs;
    uint64_t seed = 0;
    int workers = 1, samples = 4, count = 200, size = 64, epochs = 20;
    double lr = 0.1;

    auto* t = app.add_subcommand("train", "Pretrain on generated scenes");
    t->add_option("--config", config_path, "key = value config file")
        ->required()
        ->check(CLI::ExistingFile);
    t->add_option("--out", out_dir, "run directory")->required();
    auto* t_seed = t->add_option("--seed", seed, "overrides the config seed");
    t->add_option("--workers", workers, "reserved; must be 1")
        ->check(CLI::Range(1, 1));
    t->add_option("--resume", resume, "checkpoint to continue from")
        ->check(CLI::ExistingFile);

    auto* e = app.add_subcommand("eval", "Linear probe on a frozen checkpoint");
    e->add_option("--protocol", protocol, "roi or global")
        ->check(CLI::IsMember({"roi", "global"}));
    e->add_option("--ckpt", ckpt_path, "training checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    e->add_option("--data", data_dir, "directory from `scrl dataset`")
        ->required()
        ->check(CLI::ExistingDirectory);
    e->add_option("--out", out_dir, "report directory (default: ckpt's)");
    auto* e_seed = e->add_option("--seed", seed, "probe seed");
    e->add_option("--epochs", epochs, "linear-head epochs");
    e->add_option("--lr", lr, "linear-head peak LR");

    auto* r = app.add_subcommand("report", "Ablation table from run dirs");
    r->add_option("dirs", run_dirs, "run directories")->required();
    r->add_option("--out", out_dir, "output directory")->required();
    r->add_option("--downstream", downstream,
                  "run_name,metric CSV to correlate with roi accuracy")
        ->check(CLI::ExistingFile);

    auto* g = app.add_subcommand("gradcheck", "Finite-difference suite");
    auto* g_seed = g->add_option("--seed", seed, "suite seed");

    auto* gc = app.add_subcommand("geom-check",
                                  "Render matched region pairs across views");
    auto* gc_seed = gc->add_option("--seed", seed, "sampling seed");
    gc->add_option("--out", out_dir, "output directory")->required();
    gc->add_option("--samples", samples, "number of view pairs");

    auto* d = app.add_subcommand("dataset", "Generate and dump a labeled set");
    auto* d_seed = d->add_option("--seed", seed, "generation seed");
    d->add_option("--out", out_dir, "output directory")->required();
    d->add_option("--count", count, "number of images");
    d->add_option("--size", size, "canvas size in pixels");

    CLI11_PARSE(app, argc, argv);

    try {
        if (t->parsed())
            return cmd_train(config_path, out_dir, t_seed->count() > 0, seed,
                             resume);
        if (e->parsed())
            return cmd_eval(protocol, ckpt_path, data_dir, out_dir,
                            e_seed->count() > 0, seed, epochs, lr);
        if (r->parsed()) return cmd_report(run_dirs, out_dir, downstream);
        if (g->parsed()) return cmd_gradcheck(g_seed->count() > 0, seed);
        if (gc->parsed())
            return cmd_geom_check(gc_seed->count() > 0, seed, out_dir, samples);
        if (d->parsed())
            return cmd_dataset(d_seed->count() > 0, seed, out_dir, count, size);
    } catch (const train::NumericError& ex) {
        std::fprintf(stderr, "numeric failure: %s\n", ex.what());
        return 2;
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
    return 1;
}

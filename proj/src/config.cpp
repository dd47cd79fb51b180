#include "scrl/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace scrl::train {

TrainMode mode_from_string(const std::string& s) {
    if (s == "scrl") return TrainMode::Scrl;
    if (s == "global-byol") return TrainMode::GlobalByol;
    throw std::invalid_argument("unknown mode '" + s +
                                "' (expected scrl or global-byol)");
}

std::string to_string(TrainMode m) {
    return m == TrainMode::Scrl ? "scrl" : "global-byol";
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(std::stoi(trim(item)));
    if (out.empty()) throw std::invalid_argument("empty channel list");
    return out;
}

std::string join_int_list(const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

}  // namespace

void TrainConfig::validate() const {
    if (mode == TrainMode::Scrl && k < 1)
        throw std::invalid_argument("config: k must be >= 1 in scrl mode");
    if (batch < 2)
        throw std::invalid_argument("config: batch must be >= 2 (batch norm)");
    if (total_epochs < 1)
        throw std::invalid_argument("config: total_epochs must be >= 1");
    if (warmup_epochs < 0 || warmup_epochs > total_epochs)
        throw std::invalid_argument("config: warmup_epochs outside [0, total]");
    if (tau0 < 0.0 || tau0 > 1.0)
        throw std::invalid_argument("config: tau0 outside [0,1]");
    if (iou_thr && (*iou_thr <= 0.0 || *iou_thr > 1.0))
        throw std::invalid_argument("config: iou_thr outside (0,1]");
    if (jitter < 0.0)
        throw std::invalid_argument("config: jitter must be >= 0");
    if (dataset_size < batch)
        throw std::invalid_argument("config: dataset smaller than one batch");
    if (sampling_ratio < 1)
        throw std::invalid_argument("config: sampling_ratio must be >= 1");
    optimizer_kind_from_string_check();
}

// Defined out of line to avoid a header dependency on optim.hpp.
void TrainConfig::optimizer_kind_from_string_check() const {
    if (optimizer != "sgd-momentum" && optimizer != "lars")
        throw std::invalid_argument("config: unknown optimizer '" + optimizer +
                                    "'");
}

std::string TrainConfig::to_file_string() const {
    std::ostringstream os;
    os << "mode = " << to_string(mode) << "\n";
    os << "k = " << k << "\n";
    os << "iou_thr = " << (iou_thr ? fmt_double(*iou_thr) : "none") << "\n";
    os << "jitter = " << (std::isinf(jitter) ? "inf" : fmt_double(jitter))
       << "\n";
    os << "tau0 = " << fmt_double(tau0) << "\n";
    os << "lr0 = " << fmt_double(lr0) << "\n";
    os << "warmup_epochs = " << warmup_epochs << "\n";
    os << "total_epochs = " << total_epochs << "\n";
    os << "batch = " << batch << "\n";
    os << "optimizer = " << optimizer << "\n";
    os << "momentum = " << fmt_double(momentum) << "\n";
    os << "weight_decay = " << fmt_double(weight_decay) << "\n";
    os << "trust_coeff = " << fmt_double(trust_coeff) << "\n";
    os << "seed = " << seed << "\n";
    os << "workers = " << workers << "\n";
    os << "image_size = " << image_size << "\n";
    os << "dataset_size = " << dataset_size << "\n";
    os << "encoder_channels = " << join_int_list(encoder_channels) << "\n";
    os << "head_hidden = " << head_hidden << "\n";
    os << "head_out = " << head_out << "\n";
    os << "sampling_ratio = " << sampling_ratio << "\n";
    os << "checkpoint_every_epochs = " << checkpoint_every_epochs << "\n";
    return os.str();
}

std::string TrainConfig::to_json() const {
    nlohmann::json j;
    std::istringstream is(to_file_string());
    std::string line;
    while (std::getline(is, line)) {
        size_t eq = line.find('=');
        j[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return j.dump(2);
}

TrainConfig TrainConfig::from_string(const std::string& text) {
    TrainConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (key == "mode") cfg.mode = mode_from_string(val);
        else if (key == "k") cfg.k = std::stoi(val);
        else if (key == "iou_thr")
            cfg.iou_thr = val == "none"
                              ? std::nullopt
                              : std::optional<double>(std::stod(val));
        else if (key == "jitter")
            cfg.jitter = val == "inf"
                             ? std::numeric_limits<double>::infinity()
                             : std::stod(val);
        else if (key == "tau0") cfg.tau0 = std::stod(val);
        else if (key == "lr0") cfg.lr0 = std::stod(val);
        else if (key == "warmup_epochs") cfg.warmup_epochs = std::stoi(val);
        else if (key == "total_epochs") cfg.total_epochs = std::stoi(val);
        else if (key == "batch") cfg.batch = std::stoi(val);
        else if (key == "optimizer") cfg.optimizer = val;
        else if (key == "momentum") cfg.momentum = std::stod(val);
        else if (key == "weight_decay") cfg.weight_decay = std::stod(val);
        else if (key == "trust_coeff") cfg.trust_coeff = std::stod(val);
        else if (key == "seed") cfg.seed = std::stoull(val);
        else if (key == "workers") cfg.workers = std::stoi(val);
        else if (key == "image_size") cfg.image_size = std::stoi(val);
        else if (key == "dataset_size") cfg.dataset_size = std::stoi(val);
        else if (key == "encoder_channels")
            cfg.encoder_channels = parse_int_list(val);
        else if (key == "head_hidden") cfg.head_hidden = std::stoi(val);
        else if (key == "head_out") cfg.head_out = std::stoi(val);
        else if (key == "sampling_ratio") cfg.sampling_ratio = std::stoi(val);
        else if (key == "checkpoint_every_epochs")
            cfg.checkpoint_every_epochs = std::stoi(val);
        else
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

TrainConfig TrainConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return from_string(ss.str());
}

}  // namespace scrl::train

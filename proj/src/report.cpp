#include "scrl/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace scrl::report {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunRow {
    std::string name;
    std::map<std::string, std::string> config;
    std::optional<double> roi_acc, global_acc, final_loss;
};

std::optional<json> read_json(const fs::path& p) {
    std::ifstream is(p);
    if (!is) return std::nullopt;
    try {
        return json::parse(is);
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string cell(const std::optional<double>& v) {
    return v ? fmt(*v) : "-";
}

std::vector<double> average_ranks(const std::vector<double>& v) {
    size_t n = v.size();
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        double r = 0.5 * double(i + j) + 1.0;  // 1-based average rank
        for (size_t k = i; k <= j; ++k) rank[idx[k]] = r;
        i = j + 1;
    }
    return rank;
}

}  // namespace

double spearman_rank_correlation(const std::vector<double>& a,
                                 const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("spearman: need two equal-length series");
    std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
    double ma = 0, mb = 0;
    for (size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= double(ra.size());
    mb /= double(rb.size());
    double num = 0, da = 0, db = 0;
    for (size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    if (da == 0 || db == 0) return 0.0;
    return num / std::sqrt(da * db);
}

ReportResult ablation_report(const std::vector<std::string>& run_dirs,
                             const std::string& downstream_csv) {
    ReportResult res;
    std::vector<RunRow> rows;
    for (const std::string& dir : run_dirs) {
        auto manifest = read_json(fs::path(dir) / "run.json");
        if (!manifest) {
            res.warnings.push_back("skipping " + dir +
                                   ": missing or unreadable run.json");
            continue;
        }
        RunRow row;
        row.name = fs::path(dir).filename().string();
        if (row.name.empty())
            row.name = fs::path(dir).parent_path().filename().string();
        if (manifest->contains("config"))
            for (auto& [k, v] : (*manifest)["config"].items())
                row.config[k] = v.is_string() ? v.get<std::string>() : v.dump();
        if (manifest->contains("final_loss"))
            row.final_loss = (*manifest)["final_loss"].get<double>();
        if (auto e = read_json(fs::path(dir) / "eval_roi.json"))
            row.roi_acc = (*e)["accuracy"].get<double>();
        if (auto e = read_json(fs::path(dir) / "eval_global.json"))
            row.global_acc = (*e)["accuracy"].get<double>();
        rows.push_back(std::move(row));
    }

    // Columns: only the config keys whose value differs across runs.
    std::vector<std::string> delta_keys;
    if (!rows.empty()) {
        for (auto& [k, v0] : rows[0].config) {
            bool differs = false;
            for (auto& r : rows) {
                auto it = r.config.find(k);
                if (it == r.config.end() || it->second != v0) differs = true;
            }
            if (differs) delta_keys.push_back(k);
        }
        // Keys absent from row 0 but present elsewhere.
        for (auto& r : rows)
            for (auto& [k, v] : r.config)
                if (!rows[0].config.count(k) &&
                    std::find(delta_keys.begin(), delta_keys.end(), k) ==
                        delta_keys.end())
                    delta_keys.push_back(k);
        std::sort(delta_keys.begin(), delta_keys.end());
    }

    std::sort(rows.begin(), rows.end(), [&](const RunRow& a, const RunRow& b) {
        for (const auto& k : delta_keys) {
            auto ia = a.config.find(k), ib = b.config.find(k);
            std::string va = ia == a.config.end() ? "" : ia->second;
            std::string vb = ib == b.config.end() ? "" : ib->second;
            if (va != vb) return va < vb;
        }
        return a.name < b.name;
    });

    std::optional<std::map<std::string, double>> downstream;
    if (!downstream_csv.empty()) {
        std::ifstream is(downstream_csv);
        if (!is)
            throw std::runtime_error("cannot open downstream metric file " +
                                     downstream_csv);
        downstream.emplace();
        std::string line;
        while (std::getline(is, line)) {
            size_t comma = line.find(',');
            if (comma == std::string::npos) continue;
            std::string key = line.substr(0, comma);
            try {
                (*downstream)[key] = std::stod(line.substr(comma + 1));
            } catch (const std::exception&) {
                continue;  // header or malformed row
            }
        }
    }

    std::ostringstream md, csv;
    md << "| run |";
    csv << "run";
    for (auto& k : delta_keys) {
        md << ' ' << k << " |";
        csv << ',' << k;
    }
    md << " roi_acc | global_acc | final_loss |";
    csv << ",roi_acc,global_acc,final_loss";
    if (downstream) {
        md << " downstream |";
        csv << ",downstream";
    }
    md << '\n' << "|---|";
    for (size_t i = 0; i < delta_keys.size(); ++i) md << "---|";
    md << "---|---|---|";
    if (downstream) md << "---|";
    md << '\n';
    csv << '\n';

    std::vector<double> roi_series, down_series;
    for (auto& r : rows) {
        md << "| " << r.name << " |";
        csv << r.name;
        for (auto& k : delta_keys) {
            auto it = r.config.find(k);
            std::string v = it == r.config.end() ? "-" : it->second;
            md << ' ' << v << " |";
            csv << ',' << v;
        }
        md << ' ' << cell(r.roi_acc) << " | " << cell(r.global_acc) << " | "
           << cell(r.final_loss) << " |";
        csv << ',' << cell(r.roi_acc) << ',' << cell(r.global_acc) << ','
            << cell(r.final_loss);
        if (downstream) {
            auto it = downstream->find(r.name);
            std::optional<double> dv;
            if (it != downstream->end()) dv = it->second;
            md << ' ' << cell(dv) << " |";
            csv << ',' << cell(dv);
            if (dv && r.roi_acc) {
                roi_series.push_back(*r.roi_acc);
                down_series.push_back(*dv);
            }
        }
        md << '\n';
        csv << '\n';

        if (r.roi_acc) {
            res.run_names.push_back(r.name);
            res.roi_accuracies.push_back(*r.roi_acc);
        }
    }

    if (roi_series.size() >= 2) {
        res.spearman =
            spearman_rank_correlation(roi_series, down_series);
        md << "\nSpearman(roi_acc, downstream) = " << fmt(*res.spearman)
           << '\n';
    }
    res.markdown = md.str();
    res.csv = csv.str();
    return res;
}

}  // namespace scrl::report

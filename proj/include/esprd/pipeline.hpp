#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "esprd/classify.hpp"
#include "esprd/core.hpp"
#include "esprd/device.hpp"
#include "esprd/fnn.hpp"
#include "esprd/io.hpp"
#include "esprd/labels.hpp"
#include "esprd/metrics.hpp"
#include "esprd/outliers.hpp"
#include "esprd/scaler.hpp"
#include "esprd/simulate.hpp"
#include "esprd/split.hpp"

namespace esprd {

// One entry of the manifest's model list: a classical discriminator spec or
// the FNN with its architecture and training configuration.
struct ModelEntry {
    std::string name;
    bool is_fnn = false;
    ClassifierSpec spec;               // classical kinds
    std::vector<std::size_t> hidden{1000, 500, 300};
    TrainConfig train_cfg;
};

struct Manifest {
    std::string device_config;
    std::string out_dir;  // may be empty; resolved against flag/env by the CLI
    double contamination = 0.01;
    SplitSpec split;
    std::uint64_t shots_per_state = 2048;
    std::vector<ModelEntry> models;
    std::string mode = "multi";  // "single" (one excited qubit at a time) or "multi"
    std::optional<std::uint64_t> seed_override;
};

inline Manifest manifest_from_json(const nlohmann::json& j) {
    Manifest m;
    if (!j.contains("device_config")) throw config_error("manifest: missing key device_config");
    m.device_config = j["device_config"].get<std::string>();
    m.out_dir = j.value("out_dir", std::string());
    m.shots_per_state = j.value("shots_per_state", std::uint64_t{2048});
    if (j.contains("prep")) {
        const auto& p = j["prep"];
        m.contamination = p.value("contamination", 0.01);
        if (p.contains("fractions")) {
            const auto f = p["fractions"].get<std::vector<double>>();
            if (f.size() != 3) throw config_error("manifest: prep.fractions needs 3 entries");
            m.split.train = f[0];
            m.split.test = f[1];
            m.split.validation = f[2];
        }
        m.split.seed = p.value("split_seed", std::uint64_t{0});
        try {
            m.split.validate();
        } catch (const data_error& e) {
            throw config_error(std::string("manifest: ") + e.what());
        }
    }
    m.mode = j.value("mode", std::string("multi"));
    if (m.mode != "single" && m.mode != "multi")
        throw config_error("manifest: mode must be \"single\" or \"multi\"");
    if (!j.contains("models") || !j["models"].is_array() || j["models"].empty())
        throw config_error("manifest: at least one model must be listed");
    for (const auto& jm : j["models"]) {
        ModelEntry e;
        const std::string kind = jm.at("kind").get<std::string>();
        e.name = kind;
        if (kind == "fnn") {
            e.is_fnn = true;
            if (jm.contains("hidden")) e.hidden = jm["hidden"].get<std::vector<std::size_t>>();
            e.train_cfg.epochs = jm.value("epochs", 30);
            e.train_cfg.batch_size = jm.value("batch_size", 256);
            e.train_cfg.alpha = jm.value("alpha", 1e-3);
            e.train_cfg.beta1 = jm.value("beta1", 0.9);
            e.train_cfg.beta2 = jm.value("beta2", 0.999);
            e.train_cfg.eps = jm.value("eps", 1e-8);
            e.train_cfg.shuffle_seed = jm.value("shuffle_seed", std::uint64_t{0});
            e.train_cfg.init_seed = jm.value("init_seed", std::uint64_t{0});
            e.train_cfg.validate();
        } else {
            e.spec.kind = model_kind_from_string(kind);
            e.spec.k = jm.value("k", 50);
            e.spec.max_depth = jm.value("max_depth", 20);
            e.spec.min_samples_split = jm.value("min_samples_split", 2);
            e.spec.var_floor = jm.value("var_floor", 1e-9);
            e.spec.validate();
        }
        m.models.push_back(std::move(e));
    }
    return m;
}

inline Manifest manifest_from_file(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw config_error("manifest " + path + ": " + e.what());
    } catch (const data_error& e) {
        throw config_error("manifest " + path + ": " + e.what());
    }
    return manifest_from_json(j);
}

inline DeviceModel load_device(const Manifest& m) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(m.device_config));
    } catch (const nlohmann::json::exception& e) {
        throw config_error("device config " + m.device_config + ": " + e.what());
    } catch (const data_error& e) {
        throw config_error("device config " + m.device_config + ": " + e.what());
    }
    DeviceModel dev = device_from_json(j);
    if (m.seed_override) dev.seed = *m.seed_override;
    return dev;
}

namespace paths {
inline std::filesystem::path dataset(const std::filesystem::path& out) { return out / "dataset.txt"; }
inline std::filesystem::path split(const std::filesystem::path& out, const std::string& part) {
    return out / ("split_" + part + ".txt");
}
inline std::filesystem::path scaler(const std::filesystem::path& out) { return out / "scaler.json"; }
inline std::filesystem::path model(const std::filesystem::path& out, const std::string& name) {
    return out / "models" / (name + ".json");
}
inline std::filesystem::path timings(const std::filesystem::path& out) {
    return out / "models" / "timings.json";
}
inline std::filesystem::path report(const std::filesystem::path& out, const std::string& name) {
    return out / "reports" / (name + "_report.json");
}
inline std::filesystem::path cross_fidelity(const std::filesystem::path& out, const std::string& name) {
    return out / "reports" / ("crossfid_" + name + ".csv");
}
inline std::filesystem::path combined(const std::filesystem::path& out) {
    return out / "reports" / "combined_table.csv";
}
}  // namespace paths

// --- simulate ---

inline void run_simulate(const Manifest& m, const std::filesystem::path& out_dir, std::ostream& log) {
    const DeviceModel dev = load_device(m);
    const Dataset ds = simulate_dataset(dev, m.shots_per_state);
    const std::string text = dataset_to_string(ds);
    atomic_write_file(paths::dataset(out_dir), text);
    log << "simulate: " << pow3(dev.n_qubits) << " states x " << m.shots_per_state << " shots = "
        << ds.records.size() << " records, " << text.size() << " bytes -> "
        << paths::dataset(out_dir).string() << "\n";
}

// --- prep ---

struct PrepSummary {
    std::map<std::string, std::size_t> outliers_per_group;  // "q<i>/s<state>" -> removed count
    std::size_t train_records = 0, test_records = 0, validation_records = 0;
};

inline Matrix dataset_features(const Dataset& ds) {
    Matrix x(ds.records.size(), 2 * ds.n_qubits);
    for (std::size_t i = 0; i < ds.records.size(); ++i)
        std::copy(ds.records[i].features.begin(), ds.records[i].features.end(), x.row_ptr(i));
    return x;
}

inline std::vector<std::uint64_t> dataset_labels(const Dataset& ds) {
    std::vector<std::uint64_t> y(ds.records.size());
    for (std::size_t i = 0; i < ds.records.size(); ++i) y[i] = ds.records[i].prepared_label;
    return y;
}

// Outlier removal on the (I_i, Q_i) points grouped by (qubit, that qubit's
// prepared digit); a record is dropped if any of its per-qubit points is
// flagged. Groups too small or degenerate are skipped and reported.
inline Dataset remove_dataset_outliers(const Dataset& ds, double contamination,
                                       PrepSummary& summary, std::ostream& log) {
    std::vector<bool> keep(ds.records.size(), true);
    for (unsigned q = 0; q < ds.n_qubits; ++q) {
        for (int s = 0; s < 3; ++s) {
            std::vector<Vec2> pts;
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < ds.records.size(); ++i) {
                const auto digits = decode_label(ds.records[i].prepared_label, ds.n_qubits);
                if (digits[q] != s) continue;
                pts.push_back(Vec2{ds.records[i].features[2 * q], ds.records[i].features[2 * q + 1]});
                idx.push_back(i);
            }
            const std::string group = "q" + std::to_string(q) + "/s" + std::to_string(s);
            if (pts.empty()) continue;
            try {
                const auto mask = remove_outliers(pts, contamination);
                std::size_t removed = 0;
                for (std::size_t i = 0; i < mask.size(); ++i)
                    if (!mask[i]) {
                        keep[idx[i]] = false;
                        removed++;
                    }
                summary.outliers_per_group[group] = removed;
            } catch (const data_error& e) {
                log << "prep: skipping outlier removal for group " << group << ": " << e.what() << "\n";
            }
        }
    }
    Dataset out;
    out.n_qubits = ds.n_qubits;
    out.shots_per_state = ds.shots_per_state;
    out.seed = ds.seed;
    out.provenance = ds.provenance + "; outliers-removed";
    for (std::size_t i = 0; i < ds.records.size(); ++i)
        if (keep[i]) out.records.push_back(ds.records[i]);
    return out;
}

inline void scale_dataset_in_place(Dataset& ds, const ScalerParams& p) {
    for (auto& rec : ds.records)
        for (std::size_t c = 0; c < rec.features.size(); ++c)
            rec.features[c] = (rec.features[c] - p.mean[c]) / p.std_dev[c];
}

// Pipeline order: outlier removal on raw data, stratified split, scaler fit
// on the train split only, then scaling of all three splits. Split files
// store scaled features; the scaler artifact is kept beside them.
inline PrepSummary run_prep(const Manifest& m, const std::filesystem::path& out_dir,
                            std::ostream& log) {
    const Dataset raw = dataset_from_file(paths::dataset(out_dir).string());
    PrepSummary summary;
    const Dataset cleaned = remove_dataset_outliers(raw, m.contamination, summary, log);
    SplitResult parts = split_dataset(cleaned, m.split);

    const ScalerParams scaler = fit_scaler(dataset_features(parts.train));
    scale_dataset_in_place(parts.train, scaler);
    scale_dataset_in_place(parts.test, scaler);
    scale_dataset_in_place(parts.validation, scaler);

    atomic_write_file(paths::split(out_dir, "train"), dataset_to_string(parts.train));
    atomic_write_file(paths::split(out_dir, "test"), dataset_to_string(parts.test));
    atomic_write_file(paths::split(out_dir, "validation"), dataset_to_string(parts.validation));
    atomic_write_file(paths::scaler(out_dir), scaler_to_json(scaler).dump(2) + "\n");

    summary.train_records = parts.train.records.size();
    summary.test_records = parts.test.records.size();
    summary.validation_records = parts.validation.records.size();
    std::size_t total_out = 0;
    for (const auto& [group, n] : summary.outliers_per_group) {
        log << "prep: group " << group << " removed " << n << " outliers\n";
        total_out += n;
    }
    log << "prep: " << raw.records.size() << " records -> " << cleaned.records.size()
        << " after outlier removal (" << total_out << " group flags), splits "
        << summary.train_records << "/" << summary.test_records << "/"
        << summary.validation_records << "\n";
    return summary;
}

// --- train ---

inline int run_train(const Manifest& m, const std::filesystem::path& out_dir, std::ostream& log,
                     const std::set<std::string>* only = nullptr) {
    const Dataset train = dataset_from_file(paths::split(out_dir, "train").string());
    const Dataset validation = dataset_from_file(paths::split(out_dir, "validation").string());
    const Matrix train_x = dataset_features(train);
    const auto train_y = dataset_labels(train);
    const Matrix val_x = dataset_features(validation);
    const auto val_y = dataset_labels(validation);

    std::map<std::string, double> fit_seconds;
    int failures = 0;
    for (const ModelEntry& entry : m.models) {
        if (only && !only->count(entry.name)) continue;
        try {
            if (entry.is_fnn) {
                FnnArchitecture arch;
                arch.input_dim = train_x.cols();
                arch.hidden = entry.hidden;
                arch.output_dim = pow3(train.n_qubits);
                FnnTrainResult res = fnn_train(arch, train_x, train_y, val_x, val_y, entry.train_cfg);
                nlohmann::json j = fnn_to_json(res.model);
                j["kind"] = "fnn";
                atomic_write_file(paths::model(out_dir, entry.name), j.dump() + "\n");
                fit_seconds[entry.name] = res.fit_seconds;
                log << "train: fnn fitted in " << res.fit_seconds << " s, final losses (train="
                    << res.model.history.back().first << ", validation="
                    << res.model.history.back().second << ")\n";
            } else {
                const TrainedModel model = fit(entry.spec, train_x, train_y);
                atomic_write_file(paths::model(out_dir, entry.name), model_to_json(model).dump() + "\n");
                fit_seconds[entry.name] = model.fit_seconds;
                log << "train: " << entry.name << " fitted in " << model.fit_seconds << " s\n";
            }
        } catch (const error& e) {
            log << "train: model " << entry.name << " FAILED: " << e.what() << "\n";
            failures++;
        }
    }
    nlohmann::json tj{{"format_version", 1}, {"fit_seconds", fit_seconds}};
    atomic_write_file(paths::timings(out_dir), tj.dump(2) + "\n");
    return failures;
}

// --- evaluate ---

// Single-qubit mode (one qubit excited at a time, everything else grounded,
// plus the all-ground state); multi mode keeps the full sweep.
inline bool label_in_single_family(std::uint64_t label, unsigned n_qubits) {
    const auto digits = decode_label(label, n_qubits);
    int excited = 0;
    for (int d : digits)
        if (d != 0) excited++;
    return excited <= 1;
}

inline std::string matrix_to_csv(const Matrix& m) {
    std::string out;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) out += ',';
            char buf[48];
            std::snprintf(buf, sizeof buf, "%.9g", m(r, c));
            out += buf;
        }
        out += '\n';
    }
    return out;
}

// Deterministic summary of the statistical results. Timing-derived numbers
// are kept out of the reports directory (they vary run to run); they live in
// the timings artifact next to the models.
inline std::string combined_table_csv(const std::vector<FidelityReport>& reports) {
    std::string out = "metric";
    for (const auto& r : reports) out += "," + r.model;
    out += "\n";
    const unsigned n = reports.empty() ? 0 : reports.front().n_qubits;
    char buf[48];
    for (unsigned q = 0; q < n; ++q) {
        out += "F_" + std::to_string(q + 1);
        for (const auto& r : reports) {
            std::snprintf(buf, sizeof buf, "%.4f", r.qubit_f[q]);
            out += std::string(",") + buf;
        }
        out += "\n";
    }
    out += "F_GM";
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof buf, "%.4f", r.system_f);
        out += std::string(",") + buf;
    }
    out += "\n";
    return out;
}

// Wall times recorded at train time, re-read here so evaluation can attach
// them to the in-memory reports and derive the log10 ratios.
inline std::map<std::string, double> load_timings(const std::filesystem::path& out_dir) {
    std::map<std::string, double> t;
    const auto path = paths::timings(out_dir);
    if (!std::filesystem::exists(path)) return t;
    const nlohmann::json j = nlohmann::json::parse(read_file(path.string()));
    if (!j.contains("fit_seconds")) return t;
    for (const auto& [name, v] : j["fit_seconds"].items()) t[name] = v.get<double>();
    return t;
}

inline std::vector<FidelityReport> run_evaluate(const Manifest& m,
                                                const std::filesystem::path& out_dir,
                                                std::ostream& log,
                                                const std::set<std::string>* only = nullptr) {
    const Dataset test = dataset_from_file(paths::split(out_dir, "test").string());
    Dataset eval;
    eval.n_qubits = test.n_qubits;
    if (m.mode == "single") {
        for (const auto& rec : test.records)
            if (label_in_single_family(rec.prepared_label, test.n_qubits)) eval.records.push_back(rec);
    } else {
        eval.records = test.records;
    }
    if (eval.records.empty()) throw eval_error("evaluate: no evaluation records after mode filter");
    const Matrix x = dataset_features(eval);
    const auto prepared = dataset_labels(eval);

    const std::map<std::string, double> timings = load_timings(out_dir);
    std::map<std::string, double> fit_seconds;
    std::vector<FidelityReport> reports;
    for (const ModelEntry& entry : m.models) {
        if (only && !only->count(entry.name)) continue;
        const auto path = paths::model(out_dir, entry.name);
        if (!std::filesystem::exists(path))
            throw eval_error("evaluate: missing model artifact " + path.string());
        const nlohmann::json j = nlohmann::json::parse(read_file(path));
        std::vector<std::uint64_t> predicted;
        if (entry.is_fnn) {
            const FnnModel model = fnn_from_json(j);
            predicted = fnn_predict(model, x);
        } else {
            const TrainedModel model = model_from_json(j);
            predicted = predict(model, x);
        }
        const auto it = timings.find(entry.name);
        const double seconds = it == timings.end() ? 0.0 : it->second;
        FidelityReport rep =
            evaluate_assignments(entry.name, prepared, predicted, eval.n_qubits, seconds);
        atomic_write_file(paths::report(out_dir, entry.name), report_to_json(rep).dump(2) + "\n");
        atomic_write_file(paths::cross_fidelity(out_dir, entry.name), matrix_to_csv(rep.cross_f));
        if (seconds > 0.0) fit_seconds[entry.name] = seconds;
        log << "evaluate: " << entry.name << " F_GM = " << rep.system_f << "\n";
        reports.push_back(std::move(rep));
    }

    if (fit_seconds.count("gnb")) {
        nlohmann::json tj{{"format_version", 1},
                          {"fit_seconds", fit_seconds},
                          {"log10_ratio_vs_gnb", timing_ratios(fit_seconds)}};
        atomic_write_file(paths::timings(out_dir), tj.dump(2) + "\n");
    }
    atomic_write_file(paths::combined(out_dir), combined_table_csv(reports));
    return reports;
}

inline void run_report(const Manifest& m, const std::filesystem::path& out_dir, std::ostream& log) {
    std::vector<FidelityReport> reports;
    for (const ModelEntry& entry : m.models) {
        const auto path = paths::report(out_dir, entry.name);
        if (!std::filesystem::exists(path)) continue;
        reports.push_back(report_from_json(nlohmann::json::parse(read_file(path))));
    }
    if (reports.empty()) throw eval_error("report: no per-model reports found in " + out_dir.string());
    const std::string csv = combined_table_csv(reports);
    atomic_write_file(paths::combined(out_dir), csv);
    log << csv;
    const std::map<std::string, double> timings = load_timings(out_dir);
    if (timings.count("gnb")) {
        log << "log10_T_over_T_GNB:";
        for (const auto& [name, r] : timing_ratios(timings)) log << " " << name << "=" << r;
        log << "\n";
    }
}

// --- decision surface ---

struct GridSpec {
    double i_min = -3, i_max = 3, q_min = -3, q_max = 3;
    std::size_t i_steps = 100, q_steps = 100;

    void validate() const {
        if (i_steps < 1 || q_steps < 1 || i_max < i_min || q_max < q_min)
            throw config_error("grid: zero or negative extent");
    }
};

// Rectangular I-Q grid of predicted labels for one qubit. For a 2-feature
// model the grid is the whole input; for a 2N-feature model the other
// features are held at 0 (the scaled-space column mean).
inline void run_decision_surface(const std::string& model_path, unsigned qubit, const GridSpec& grid,
                                 const std::filesystem::path& out_path) {
    grid.validate();
    const nlohmann::json j = nlohmann::json::parse(read_file(model_path));
    const bool is_fnn = j.value("kind", std::string()) == "fnn";

    std::size_t dim;
    FnnModel fnn;
    TrainedModel classic;
    if (is_fnn) {
        fnn = fnn_from_json(j);
        dim = fnn.arch.input_dim;
    } else {
        classic = model_from_json(j);
        dim = classic.dim;
    }
    if (dim % 2 != 0 || qubit >= dim / 2)
        throw config_error("decision-surface: qubit index out of range for model dimensionality");

    const std::size_t n_cells = grid.i_steps * grid.q_steps;
    Matrix x(n_cells, dim);
    auto coord = [](double lo, double hi, std::size_t steps, std::size_t k) {
        return steps == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(steps - 1);
    };
    std::size_t row = 0;
    for (std::size_t qi = 0; qi < grid.q_steps; ++qi)
        for (std::size_t ii = 0; ii < grid.i_steps; ++ii, ++row) {
            x(row, 2 * qubit) = coord(grid.i_min, grid.i_max, grid.i_steps, ii);
            x(row, 2 * qubit + 1) = coord(grid.q_min, grid.q_max, grid.q_steps, qi);
        }

    const auto labels = is_fnn ? fnn_predict(fnn, x) : predict(classic, x);

    std::string out = "# esprd-grid v1\n# qubit=" + std::to_string(qubit) + " i_steps=" +
                      std::to_string(grid.i_steps) + " q_steps=" + std::to_string(grid.q_steps) + "\n";
    out += "# columns: I Q label\n";
    char buf[64];
    for (std::size_t r = 0; r < n_cells; ++r) {
        std::snprintf(buf, sizeof buf, "%.9g %.9g %llu\n", x(r, 2 * qubit), x(r, 2 * qubit + 1),
                      static_cast<unsigned long long>(labels[r]));
        out += buf;
    }
    atomic_write_file(out_path, out);
}

// --- histogram ---

struct HistogramBin {
    double left = 0, right = 0;
    std::uint64_t count = 0;
};

inline std::vector<HistogramBin> histogram_1d(const std::vector<double>& v, std::size_t n_bins) {
    if (v.empty()) throw eval_error("histogram: empty group");
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it, hi = *hi_it;
    std::vector<HistogramBin> bins;
    if (lo == hi) {
        bins.push_back(HistogramBin{lo, hi, v.size()});
        return bins;
    }
    const double width = (hi - lo) / static_cast<double>(n_bins);
    bins.resize(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) {
        bins[b].left = lo + width * static_cast<double>(b);
        bins[b].right = b + 1 == n_bins ? hi : lo + width * static_cast<double>(b + 1);
    }
    for (double x : v) {
        std::size_t b = static_cast<std::size_t>((x - lo) / width);
        if (b >= n_bins) b = n_bins - 1;  // hi lands in the last (right-closed) bin
        bins[b].count++;
    }
    return bins;
}

inline void run_histogram(const std::string& dataset_path, unsigned qubit, int state,
                          std::size_t n_bins, const std::filesystem::path& out_path) {
    if (state < 0 || state > 2) throw config_error("histogram: state must be 0, 1 or 2");
    const Dataset ds = dataset_from_file(dataset_path);
    if (qubit >= ds.n_qubits) throw config_error("histogram: qubit index out of range");
    std::vector<double> i_vals, q_vals;
    for (const auto& rec : ds.records) {
        const auto digits = decode_label(rec.prepared_label, ds.n_qubits);
        if (digits[qubit] != state) continue;
        i_vals.push_back(rec.features[2 * qubit]);
        q_vals.push_back(rec.features[2 * qubit + 1]);
    }
    const auto bins_i = histogram_1d(i_vals, n_bins);
    const auto bins_q = histogram_1d(q_vals, n_bins);

    std::string out = "# esprd-histogram v1\n# qubit=" + std::to_string(qubit) +
                      " state=" + std::to_string(state) + " samples=" + std::to_string(i_vals.size()) +
                      "\n# columns: component bin_left bin_right count\n";
    char buf[96];
    for (const auto& [tag, bins] : {std::pair<char, const std::vector<HistogramBin>&>{'I', bins_i},
                                    {'Q', bins_q}}) {
        for (const auto& b : bins) {
            std::snprintf(buf, sizeof buf, "%c %.9g %.9g %llu\n", tag, b.left, b.right,
                          static_cast<unsigned long long>(b.count));
            out += buf;
        }
    }
    atomic_write_file(out_path, out);
}

}  // namespace esprd

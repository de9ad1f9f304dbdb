// Acceptance suite. Each criterion prints one PASS/FAIL line; the process
// exits nonzero if any criterion fails.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "esprd/classify.hpp"
#include "esprd/fnn.hpp"
#include "esprd/io.hpp"
#include "esprd/labels.hpp"
#include "esprd/metrics.hpp"
#include "esprd/outliers.hpp"
#include "esprd/pipeline.hpp"
#include "esprd/rng.hpp"
#include "esprd/simulate.hpp"

using namespace esprd;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool ok, const std::string& detail = "") {
    std::printf("[%s] criterion %2d: %s%s%s\n", ok ? "PASS" : "FAIL", number, name.c_str(),
                detail.empty() ? "" : " -- ", detail.c_str());
    if (!ok) g_failures++;
}

// ---------- 1: published per-qubit fidelities reproduce the geometric means ----------

struct PublishedRow {
    const char* hardware;
    const char* model;
    double f[5];
    double f_gm;
    bool excluded;  // known inconsistency in the source table
};

const PublishedRow kPublishedRows[] = {
    {"rome", "knn", {0.913, 0.918, 0.975, 0.940, 0.924}, 0.934, false},
    {"rome", "dtc", {0.891, 0.914, 0.963, 0.936, 0.910}, 0.933, false},
    {"rome", "gnb", {0.918, 0.925, 0.978, 0.943, 0.930}, 0.939, false},
    {"rome", "qda", {0.919, 0.927, 0.978, 0.945, 0.932}, 0.939, false},
    {"rome", "lda", {0.918, 0.926, 0.978, 0.943, 0.930}, 0.939, false},
    {"rome", "fnn", {0.923, 0.927, 0.981, 0.949, 0.938}, 0.943, false},
    {"bogota", "knn", {0.927, 0.941, 0.969, 0.980, 0.896}, 0.937, false},
    {"bogota", "dtc", {0.943, 0.953, 0.975, 0.984, 0.916}, 0.890, true},
    {"bogota", "gnb", {0.943, 0.953, 0.975, 0.983, 0.915}, 0.943, false},
    {"bogota", "qda", {0.943, 0.953, 0.973, 0.983, 0.914}, 0.946, false},
    {"bogota", "lda", {0.940, 0.951, 0.975, 0.983, 0.910}, 0.946, false},
    {"bogota", "fnn", {0.947, 0.957, 0.981, 0.989, 0.923}, 0.960, false},
    {"belem", "knn", {0.957, 0.950, 0.902, 0.987, 0.977}, 0.954, false},
    {"belem", "dtc", {0.946, 0.936, 0.882, 0.983, 0.971}, 0.943, false},
    {"belem", "gnb", {0.958, 0.950, 0.904, 0.988, 0.979}, 0.955, false},
    {"belem", "qda", {0.958, 0.950, 0.903, 0.988, 0.979}, 0.955, false},
    {"belem", "lda", {0.958, 0.950, 0.902, 0.987, 0.978}, 0.955, false},
    {"belem", "fnn", {0.963, 0.964, 0.904, 0.993, 0.987}, 0.962, false},
    {"quito", "knn", {0.942, 0.952, 0.974, 0.982, 0.912}, 0.952, false},
    {"quito", "dtc", {0.927, 0.941, 0.969, 0.980, 0.896}, 0.942, false},
    {"quito", "gnb", {0.943, 0.953, 0.975, 0.984, 0.916}, 0.954, false},
    {"quito", "qda", {0.943, 0.953, 0.975, 0.983, 0.915}, 0.954, false},
    {"quito", "lda", {0.943, 0.953, 0.973, 0.983, 0.914}, 0.953, false},
    {"quito", "fnn", {0.959, 0.961, 0.983, 0.992, 0.931}, 0.965, false},
    {"manila", "knn", {0.922, 0.915, 0.908, 0.922, 0.944}, 0.922, false},
    {"manila", "dtc", {0.904, 0.895, 0.887, 0.903, 0.931}, 0.904, false},
    {"manila", "gnb", {0.926, 0.919, 0.913, 0.925, 0.948}, 0.926, false},
    {"manila", "qda", {0.925, 0.918, 0.912, 0.924, 0.947}, 0.925, false},
    {"manila", "lda", {0.926, 0.919, 0.913, 0.925, 0.948}, 0.926, false},
    {"manila", "fnn", {0.937, 0.921, 0.913, 0.932, 0.961}, 0.933, false},
};

void criterion_1() {
    bool ok = true;
    std::string detail;
    for (const auto& row : kPublishedRows) {
        if (row.excluded) continue;
        const double gm = system_fidelity({row.f[0], row.f[1], row.f[2], row.f[3], row.f[4]});
        if (std::abs(gm - row.f_gm) > 0.002) {
            ok = false;
            detail += std::string(row.hardware) + "/" + row.model + " gm=" + std::to_string(gm) + " ";
        }
    }
    report(1, "published fidelity table is self-consistent under system_fidelity", ok, detail);
}

// ---------- 2: label arithmetic ----------

void criterion_2() {
    bool ok = encode_label({2, 2, 1, 0, 2}) == 227;
    for (std::uint64_t x = 0; x < 243 && ok; ++x) ok = encode_label(decode_label(x, 5)) == x;
    report(2, "encode_label(|22102>) == 227 and 243-state bijection", ok);
}

// ---------- 3: uniform-random predictor fidelity ----------

void criterion_3() {
    const std::size_t n = 100000;
    ShotStream rng(0xACCE5503ULL);
    std::vector<std::uint64_t> prepared(n), predicted(n);
    for (std::size_t i = 0; i < n; ++i) {
        prepared[i] = i % 3;
        predicted[i] = rng.next_u64() % 3;
    }
    const auto conf = qubit_confusion(prepared, predicted, 1);
    const double f = qubit_fidelity(conf[0]);
    const bool ok = std::abs(f - 2.0 / 3.0) < 0.01;
    report(3, "uniform-random assignment yields F = 2/3 +- 0.01", ok,
           "F = " + std::to_string(f));
}

// ---------- 4: Gaussian models reach the analytic Bayes error ----------

void criterion_4() {
    // Two classes at -1 and +1, unit variance, equal priors. Bayes error =
    // Phi(-1), from the closed-form normal CDF.
    const double bayes_error = 0.5 * std::erfc(1.0 / std::sqrt(2.0));
    const std::size_t n_train = 20000, n_test = 100000;
    ShotStream rng(0xACCE5504ULL);

    Matrix train_x(n_train, 1), test_x(n_test, 1);
    std::vector<std::uint64_t> train_y(n_train), test_y(n_test);
    for (std::size_t i = 0; i < n_train; ++i) {
        train_y[i] = i % 2;
        train_x(i, 0) = (train_y[i] ? 1.0 : -1.0) + rng.gaussian();
    }
    for (std::size_t i = 0; i < n_test; ++i) {
        test_y[i] = i % 2;
        test_x(i, 0) = (test_y[i] ? 1.0 : -1.0) + rng.gaussian();
    }

    bool ok = true;
    std::string detail;
    for (ModelKind kind : {ModelKind::lda, ModelKind::qda, ModelKind::gnb}) {
        ClassifierSpec spec;
        spec.kind = kind;
        const TrainedModel model = fit(spec, train_x, train_y);
        const auto pred = predict(model, test_x);
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < n_test; ++i)
            if (pred[i] != test_y[i]) wrong++;
        const double err = static_cast<double>(wrong) / static_cast<double>(n_test);
        detail += to_string(kind) + "=" + std::to_string(err) + " ";
        if (std::abs(err - bayes_error) > 0.01) ok = false;
    }
    report(4, "LDA/QDA/GNB within 1pp of the analytic Bayes error", ok,
           detail + "bayes=" + std::to_string(bayes_error));
}

// ---------- 5: KNN equals the brute-force oracle ----------

std::vector<std::uint64_t> knn_oracle(const Matrix& train_x, const std::vector<std::uint64_t>& train_y,
                                      const Matrix& query, std::size_t k,
                                      const std::vector<std::uint64_t>& classes) {
    std::vector<std::uint64_t> out(query.rows());
    for (std::size_t r = 0; r < query.rows(); ++r) {
        std::vector<std::pair<double, std::size_t>> d;
        for (std::size_t t = 0; t < train_x.rows(); ++t) {
            double s = 0;
            for (std::size_t f = 0; f < train_x.cols(); ++f)
                s += std::abs(query(r, f) - train_x(t, f));
            d.push_back({s, t});
        }
        std::sort(d.begin(), d.end());
        std::map<std::uint64_t, std::size_t> votes;
        for (std::size_t i = 0; i < k; ++i) votes[train_y[d[i].second]]++;
        std::uint64_t best = classes.front();
        std::size_t best_count = 0;
        for (std::uint64_t c : classes) {
            const std::size_t v = votes.count(c) ? votes[c] : 0;
            if (v > best_count) {
                best_count = v;
                best = c;
            }
        }
        out[r] = best;
    }
    return out;
}

void criterion_5() {
    ShotStream rng(0xACCE5505ULL);
    bool ok = true;
    for (int inst = 0; inst < 25 && ok; ++inst) {
        const std::size_t n_train = 20 + rng.next_u64() % 181;
        const std::size_t n_query = 10 + rng.next_u64() % 91;
        const std::size_t dims = 2 + rng.next_u64() % 9;
        const std::size_t n_classes = 2 + rng.next_u64() % 4;
        Matrix train_x(n_train, dims), query(n_query, dims);
        std::vector<std::uint64_t> train_y(n_train);
        // integer-ish coordinates force plenty of exact distance ties
        for (auto& v : train_x.data()) v = static_cast<double>(rng.next_u64() % 7);
        for (auto& v : query.data()) v = static_cast<double>(rng.next_u64() % 7);
        for (auto& y : train_y) y = rng.next_u64() % n_classes;

        ClassifierSpec spec;
        spec.kind = ModelKind::knn;
        spec.k = 1 + static_cast<int>(rng.next_u64() % 50);
        const TrainedModel model = fit(spec, train_x, train_y);
        const auto got = predict(model, query);
        const auto want = knn_oracle(train_x, train_y, query,
                                     std::min<std::size_t>(spec.k, n_train), model.classes);
        if (got != want) ok = false;
    }
    report(5, "KNN matches the exhaustive L1 oracle on 25 random instances", ok);
}

// ---------- 6: FNN gradients match finite differences ----------

void criterion_6() {
    bool ok = true;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        FnnArchitecture arch;
        arch.input_dim = 4;
        arch.hidden = {6, 5};
        arch.output_dim = 3;
        FnnModel model = fnn_init(arch, seed);
        // zero-initialized biases can leave a fully dead row sitting exactly
        // on the rectifier kink, where no finite-difference check is
        // meaningful; nudge every bias to a generic differentiable point
        ShotStream bias_rng(seed * 131 + 7);
        for (auto& layer : model.biases)
            for (double& v : layer) v = 0.05 * bias_rng.gaussian();

        ShotStream rng(seed * 977);
        const std::size_t b = 7;
        Matrix x(b, 4), y(b, 3);
        for (auto& v : x.data()) v = rng.gaussian();
        for (std::size_t r = 0; r < b; ++r) y(r, rng.next_u64() % 3) = 1.0;

        FnnGradient grad;
        fnn_loss_and_grad(model, x, y, grad);

        const double h = 1e-5;
        auto check = [&](double& param, double analytic) {
            const double orig = param;
            param = orig + h;
            FnnGradient dummy;
            const double lp = fnn_loss_and_grad(model, x, y, dummy);
            param = orig - h;
            const double lm = fnn_loss_and_grad(model, x, y, dummy);
            param = orig;
            const double numeric = (lp - lm) / (2 * h);
            const double rel = std::abs(analytic - numeric) /
                               std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            worst = std::max(worst, rel);
            if (rel > 1e-4) ok = false;
        };
        for (std::size_t l = 0; l < model.weights.size(); ++l) {
            for (std::size_t i = 0; i < model.weights[l].data().size(); ++i)
                check(model.weights[l].data()[i], grad.weights[l].data()[i]);
            for (std::size_t i = 0; i < model.biases[l].size(); ++i)
                check(model.biases[l][i], grad.biases[l][i]);
        }
    }
    report(6, "FNN analytic gradients match central differences (rel < 1e-4)", ok,
           "worst rel error = " + std::to_string(worst));
}

// ---------- 7: desk-scale full-pipeline comparison ----------

std::string three_qubit_device_json(std::uint64_t seed, double coupling) {
    std::ostringstream ss;
    ss << R"({"format_version":1,"n_qubits":3,"seed":)" << seed
       << R"(,"default_variance":0.09,"qubits":[)";
    for (int q = 0; q < 3; ++q) {
        if (q) ss << ",";
        const double rot = 0.3 * q;
        ss << R"({"means":[[)" << 0.0 + rot << "," << 0.0 << "],[" << 2.0 << "," << rot << "],[" << rot
           << "," << 2.0 << R"(]],"decay":{"1->0":0.03,"2->1":0.02,"2->0":0.01}})";
    }
    ss << R"(],"crosstalk":[[0,)" << coupling << "," << coupling / 2 << "],[" << coupling
       << ",0," << coupling << "],[" << coupling / 2 << "," << coupling << ",0]]}";
    return ss.str();
}

void criterion_7() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "esprd_acceptance_7";
    fs::remove_all(dir);
    fs::create_directories(dir);
    atomic_write_file(dir / "device.json", three_qubit_device_json(20250824, 0.05));

    nlohmann::json mj{
        {"device_config", (dir / "device.json").string()},
        {"out_dir", dir.string()},
        {"shots_per_state", 512},
        {"prep", {{"contamination", 0.01}, {"fractions", {0.5, 0.3, 0.2}}, {"split_seed", 11}}},
        {"mode", "multi"},
        {"models",
         {{{"kind", "knn"}, {"k", 50}},
          {{"kind", "dtc"}},
          {{"kind", "gnb"}},
          {{"kind", "lda"}},
          {{"kind", "qda"}},
          {{"kind", "fnn"},
           {"hidden", {128, 64, 32}},
           {"epochs", 25},
           {"batch_size", 128},
           {"init_seed", 3},
           {"shuffle_seed", 4}}}}};
    const Manifest manifest = manifest_from_json(mj);

    std::ostringstream log;
    run_simulate(manifest, dir, log);
    run_prep(manifest, dir, log);
    const int failures = run_train(manifest, dir, log);
    const auto reports = run_evaluate(manifest, dir, log);

    bool ok = failures == 0 && reports.size() == 6;
    std::string detail;
    double f_gnb = 0, f_fnn = 0, t_gnb = 0, t_fnn = 0;
    for (const auto& rep : reports) {
        detail += rep.model + "=" + std::to_string(rep.system_f) + " ";
        if (rep.system_f < 0.8) ok = false;
        if (rep.model == "gnb") {
            f_gnb = rep.system_f;
            t_gnb = rep.fit_seconds;
        }
        if (rep.model == "fnn") {
            f_fnn = rep.system_f;
            t_fnn = rep.fit_seconds;
        }
    }
    if (f_fnn < f_gnb - 0.01) ok = false;
    if (!(t_gnb < t_fnn)) ok = false;
    report(7, "full 3-qubit pipeline: all six models, F_GM >= 0.8, FNN >= GNB - 0.01, GNB faster",
           ok, detail);
}

// ---------- 8: cross-fidelity null and coupling signal ----------

void criterion_8() {
    // Null: decay-induced errors but no coupling -> off-diagonals near zero.
    nlohmann::json null_dev = nlohmann::json::parse(three_qubit_device_json(77, 0.0));
    const DeviceModel dev = device_from_json(null_dev);
    const std::uint64_t shots = 3800;  // 27 * 3800 ~ 1e5 shots
    const Dataset ds = simulate_dataset(dev, shots);

    // Per-qubit nearest-mean assignment (exact cluster knowledge).
    auto assign = [](const DeviceModel& d, const ShotRecord& rec) {
        std::vector<int> digits(d.n_qubits);
        for (unsigned q = 0; q < d.n_qubits; ++q) {
            double best = 1e300;
            for (int s = 0; s < 3; ++s) {
                const double dx = rec.features[2 * q] - d.qubits[q].mean[s].x;
                const double dy = rec.features[2 * q + 1] - d.qubits[q].mean[s].y;
                if (dx * dx + dy * dy < best) {
                    best = dx * dx + dy * dy;
                    digits[q] = s;
                }
            }
        }
        return encode_label(digits);
    };

    std::vector<std::uint64_t> prepared, predicted;
    for (const auto& rec : ds.records) {
        prepared.push_back(rec.prepared_label);
        predicted.push_back(assign(dev, rec));
    }
    const Matrix null_cf = cross_fidelity(prepared, predicted, dev.n_qubits);
    bool null_ok = true;
    double null_max = 0.0;
    for (unsigned i = 0; i < 3; ++i)
        for (unsigned j = 0; j < 3; ++j)
            if (i != j) {
                null_max = std::max(null_max, std::abs(null_cf(i, j)));
                if (std::abs(null_cf(i, j)) >= 0.02) null_ok = false;
            }

    // Signal: strong coupling C(0,1), assignment deliberately blind to it.
    nlohmann::json sig_dev_json = nlohmann::json::parse(three_qubit_device_json(78, 0.0));
    sig_dev_json["crosstalk"][0][1] = 0.6;
    const DeviceModel sig_dev = device_from_json(sig_dev_json);
    const Dataset sig_ds = simulate_dataset(sig_dev, shots);
    prepared.clear();
    predicted.clear();
    DeviceModel blind = sig_dev;  // classifier built from uncoupled means
    blind.crosstalk = Matrix(3, 3, 0.0);
    for (const auto& rec : sig_ds.records) {
        prepared.push_back(rec.prepared_label);
        predicted.push_back(assign(blind, rec));
    }
    const Matrix sig_cf = cross_fidelity(prepared, predicted, 3);
    const bool signal_ok = std::abs(sig_cf(0, 1)) > 0.02;

    report(8, "cross-fidelity: null off-diagonals < 0.02, coupling-blind signal exceeds null",
           null_ok && signal_ok,
           "null max = " + std::to_string(null_max) + ", |F_CF(0,1)| signal = " +
               std::to_string(std::abs(sig_cf(0, 1))));
}

// ---------- 9: end-to-end determinism through the CLI ----------

void criterion_9() {
    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / "esprd_acceptance_9";
    fs::remove_all(base);
    fs::create_directories(base);
    atomic_write_file(base / "device.json", three_qubit_device_json(31337, 0.04));

    bool ok = true;
    std::vector<std::string> contents[2];
    for (int run = 0; run < 2; ++run) {
        const fs::path dir = base / ("run" + std::to_string(run));
        fs::create_directories(dir);
        nlohmann::json mj{
            {"device_config", (base / "device.json").string()},
            {"out_dir", dir.string()},
            {"shots_per_state", 64},
            {"prep", {{"contamination", 0.01}, {"fractions", {0.5, 0.3, 0.2}}, {"split_seed", 5}}},
            {"mode", "multi"},
            {"models",
             {{{"kind", "gnb"}},
              {{"kind", "lda"}},
              {{"kind", "knn"}, {"k", 10}},
              {{"kind", "fnn"}, {"hidden", {16, 8}}, {"epochs", 3}, {"batch_size", 64}}}}};
        atomic_write_file(base / "manifest.json", mj.dump(2));

        for (const char* verb : {"simulate", "prep", "train", "evaluate"}) {
            const std::string cmd = std::string(ESPRD_CLI_PATH) + " " + verb + " --manifest " +
                                    (base / "manifest.json").string() + " > /dev/null 2>&1";
            if (std::system(cmd.c_str()) != 0) {
                ok = false;
                break;
            }
        }
        if (!ok) break;
        // the reports are the deliverable; compare every one of them
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(dir / "reports"))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files)
            contents[run].push_back(f.filename().string() + "\n" + read_file(f));
    }
    if (ok) ok = !contents[0].empty() && contents[0] == contents[1];
    report(9, "two end-to-end CLI runs produce byte-identical reports", ok);
}

// ---------- 10: outlier removal contract ----------

void criterion_10() {
    ShotStream rng(0xACCE5510ULL);
    bool ok = true;
    for (int inst = 0; inst < 20 && ok; ++inst) {
        const std::size_t n_inliers = 300 + rng.next_u64() % 300;
        const std::size_t n_planted = 2 + rng.next_u64() % 5;
        const std::size_t m = n_inliers + n_planted;
        const double cx = rng.gaussian() * 5, cy = rng.gaussian() * 5;
        std::vector<Vec2> pts;
        for (std::size_t i = 0; i < n_inliers; ++i)
            pts.push_back(Vec2{cx + rng.gaussian(), cy + rng.gaussian()});
        for (std::size_t i = 0; i < n_planted; ++i) {
            const double ang = rng.uniform() * 6.283185307179586;
            const double rad = 20.0 + rng.uniform() * 20.0;  // >= 10 robust sigma away
            pts.push_back(Vec2{cx + rad * std::cos(ang), cy + rad * std::sin(ang)});
        }
        const double contamination = static_cast<double>(n_planted) / static_cast<double>(m);
        const auto keep = remove_outliers(pts, contamination);
        std::size_t removed = 0;
        for (bool k : keep)
            if (!k) removed++;
        const std::size_t expected =
            static_cast<std::size_t>(std::ceil(contamination * static_cast<double>(m)));
        if (removed != expected) ok = false;
        for (std::size_t i = n_inliers; i < m; ++i)
            if (keep[i]) ok = false;  // every planted point must be flagged
    }
    report(10, "remove_outliers flags all planted points and exactly ceil(c*M) total", ok);
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    if (g_failures) {
        std::printf("%d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}

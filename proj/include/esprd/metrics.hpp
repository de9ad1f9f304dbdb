#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "esprd/core.hpp"
#include "esprd/labels.hpp"

namespace esprd {

// Per-qubit 3x3 count matrix: rows = prepared single-qubit state, columns =
// assigned state, marginalized over all other qubits' preparations.
struct QubitConfusion {
    std::array<std::array<std::uint64_t, 3>, 3> counts{};

    std::uint64_t row_sum(int s) const { return counts[s][0] + counts[s][1] + counts[s][2]; }

    std::array<std::array<double, 3>, 3> normalized() const {
        std::array<std::array<double, 3>, 3> p{};
        for (int s = 0; s < 3; ++s) {
            const std::uint64_t n = row_sum(s);
            if (n == 0) throw eval_error("confusion: prepared state " + std::to_string(s) +
                                         " absent from evaluation set");
            for (int t = 0; t < 3; ++t)
                p[s][t] = static_cast<double>(counts[s][t]) / static_cast<double>(n);
        }
        return p;
    }
};

inline std::vector<QubitConfusion> qubit_confusion(const std::vector<std::uint64_t>& prepared,
                                                   const std::vector<std::uint64_t>& predicted,
                                                   unsigned n_qubits) {
    if (prepared.size() != predicted.size())
        throw eval_error("qubit_confusion: label vector length mismatch");
    std::vector<QubitConfusion> conf(n_qubits);
    for (std::size_t i = 0; i < prepared.size(); ++i) {
        const auto pd = decode_label(prepared[i], n_qubits);
        const auto qd = decode_label(predicted[i], n_qubits);
        for (unsigned q = 0; q < n_qubits; ++q) conf[q].counts[pd[q]][qd[q]]++;
    }
    return conf;
}

// Assignment fidelity: one minus the mean of the six cross-state
// misassignment probabilities.
inline double qubit_fidelity(const QubitConfusion& conf) {
    const auto p = conf.normalized();
    double off = 0.0;
    for (int s = 0; s < 3; ++s)
        for (int t = 0; t < 3; ++t)
            if (s != t) off += p[s][t];
    return 1.0 - off / 6.0;
}

inline double system_fidelity(const std::vector<double>& f) {
    if (f.empty()) throw eval_error("system_fidelity: empty fidelity list");
    double log_sum = 0.0;
    for (double v : f) {
        if (v < 0.0) throw eval_error("system_fidelity: negative fidelity");
        if (v == 0.0) return 0.0;
        log_sum += std::log(v);
    }
    return std::exp(log_sum / static_cast<double>(f.size()));
}

// Cross-fidelity estimator: for i != j, the negated Pearson correlation
// between qubit i's misassignment indicator and qubit j's prepared excitation
// level, so negative entries mean misassignments co-occur with neighbor
// excitation. Diagonal entries are the per-qubit fidelities. With zero error
// variance the correlation is defined as 0; zero variance in the prepared
// levels means the evaluation sweep lacks coverage and is an error.
inline Matrix cross_fidelity(const std::vector<std::uint64_t>& prepared,
                             const std::vector<std::uint64_t>& predicted, unsigned n_qubits) {
    if (prepared.size() != predicted.size())
        throw eval_error("cross_fidelity: label vector length mismatch");
    const std::size_t m = prepared.size();
    if (m == 0) throw eval_error("cross_fidelity: empty evaluation set");

    Matrix err(m, n_qubits);   // e_i per shot
    Matrix level(m, n_qubits); // x_j per shot
    for (std::size_t i = 0; i < m; ++i) {
        const auto pd = decode_label(prepared[i], n_qubits);
        const auto qd = decode_label(predicted[i], n_qubits);
        for (unsigned q = 0; q < n_qubits; ++q) {
            err(i, q) = pd[q] != qd[q] ? 1.0 : 0.0;
            level(i, q) = static_cast<double>(pd[q]);
        }
    }

    std::vector<double> e_mean(n_qubits, 0.0), x_mean(n_qubits, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (unsigned q = 0; q < n_qubits; ++q) {
            e_mean[q] += err(i, q);
            x_mean[q] += level(i, q);
        }
    for (unsigned q = 0; q < n_qubits; ++q) {
        e_mean[q] /= static_cast<double>(m);
        x_mean[q] /= static_cast<double>(m);
    }
    std::vector<double> e_var(n_qubits, 0.0), x_var(n_qubits, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (unsigned q = 0; q < n_qubits; ++q) {
            e_var[q] += (err(i, q) - e_mean[q]) * (err(i, q) - e_mean[q]);
            x_var[q] += (level(i, q) - x_mean[q]) * (level(i, q) - x_mean[q]);
        }

    const auto conf = qubit_confusion(prepared, predicted, n_qubits);
    Matrix cf(n_qubits, n_qubits);
    for (unsigned i = 0; i < n_qubits; ++i) {
        cf(i, i) = qubit_fidelity(conf[i]);
        for (unsigned j = 0; j < n_qubits; ++j) {
            if (i == j) continue;
            if (x_var[j] == 0.0)
                throw eval_error("cross_fidelity: prepared levels of qubit " + std::to_string(j) +
                                 " have zero variance (insufficient state coverage)");
            if (e_var[i] == 0.0) {
                cf(i, j) = 0.0;
                continue;
            }
            double cov = 0.0;
            for (std::size_t s = 0; s < m; ++s)
                cov += (err(s, i) - e_mean[i]) * (level(s, j) - x_mean[j]);
            cf(i, j) = -cov / std::sqrt(e_var[i] * x_var[j]);
        }
    }
    return cf;
}

// log10(T / T_GNB) per model; requires the "gnb" baseline.
inline std::map<std::string, double> timing_ratios(const std::map<std::string, double>& fit_seconds) {
    auto it = fit_seconds.find("gnb");
    if (it == fit_seconds.end()) throw eval_error("timing_ratios: missing gnb baseline");
    if (it->second <= 0.0) throw eval_error("timing_ratios: gnb time must be positive");
    std::map<std::string, double> out;
    for (const auto& [name, t] : fit_seconds)
        out[name] = name == "gnb" ? 0.0 : std::log10(t / it->second);
    return out;
}

struct FidelityReport {
    std::string model;
    unsigned n_qubits = 0;
    std::vector<double> qubit_f;                // F_i
    double system_f = 0.0;                      // F_GM
    Matrix cross_f;                             // N x N
    std::vector<QubitConfusion> confusion;      // raw counts
    double fit_seconds = 0.0;
};

inline FidelityReport evaluate_assignments(const std::string& model_name,
                                           const std::vector<std::uint64_t>& prepared,
                                           const std::vector<std::uint64_t>& predicted,
                                           unsigned n_qubits, double fit_seconds,
                                           bool with_cross_fidelity = true) {
    FidelityReport rep;
    rep.model = model_name;
    rep.n_qubits = n_qubits;
    rep.fit_seconds = fit_seconds;
    rep.confusion = qubit_confusion(prepared, predicted, n_qubits);
    for (const auto& c : rep.confusion) rep.qubit_f.push_back(qubit_fidelity(c));
    rep.system_f = system_fidelity(rep.qubit_f);
    if (with_cross_fidelity) rep.cross_f = cross_fidelity(prepared, predicted, n_qubits);
    return rep;
}

inline nlohmann::json report_to_json(const FidelityReport& rep) {
    // wall-clock timing is excluded so report files are byte-stable across
    // reruns; timings live in their own artifact beside the models
    nlohmann::json j{{"format_version", 1},
                     {"model", rep.model},
                     {"n_qubits", rep.n_qubits},
                     {"qubit_fidelity", rep.qubit_f},
                     {"system_fidelity", rep.system_f}};
    nlohmann::json conf = nlohmann::json::array();
    for (const auto& c : rep.confusion) {
        nlohmann::json rows = nlohmann::json::array();
        nlohmann::json norm = nlohmann::json::array();
        const bool complete = c.row_sum(0) && c.row_sum(1) && c.row_sum(2);
        for (int s = 0; s < 3; ++s)
            rows.push_back({c.counts[s][0], c.counts[s][1], c.counts[s][2]});
        if (complete) {
            const auto p = c.normalized();
            for (int s = 0; s < 3; ++s) norm.push_back({p[s][0], p[s][1], p[s][2]});
        }
        conf.push_back({{"counts", rows}, {"normalized", norm}});
    }
    j["confusion"] = std::move(conf);
    if (rep.cross_f.rows() == rep.n_qubits) {
        nlohmann::json cf = nlohmann::json::array();
        for (unsigned i = 0; i < rep.n_qubits; ++i) {
            std::vector<double> row(rep.cross_f.row_ptr(i), rep.cross_f.row_ptr(i) + rep.n_qubits);
            cf.push_back(row);
        }
        j["cross_fidelity"] = std::move(cf);
    }
    return j;
}

inline FidelityReport report_from_json(const nlohmann::json& j) {
    if (j.value("format_version", 0) != 1) throw data_error("report: unsupported version");
    FidelityReport rep;
    rep.model = j.at("model").get<std::string>();
    rep.n_qubits = j.at("n_qubits").get<unsigned>();
    rep.qubit_f = j.at("qubit_fidelity").get<std::vector<double>>();
    rep.system_f = j.at("system_fidelity").get<double>();
    rep.fit_seconds = j.value("fit_seconds", 0.0);
    for (const auto& c : j.at("confusion")) {
        QubitConfusion qc;
        const auto& rows = c.at("counts");
        for (int s = 0; s < 3; ++s)
            for (int t = 0; t < 3; ++t) qc.counts[s][t] = rows[s][t].get<std::uint64_t>();
        rep.confusion.push_back(qc);
    }
    if (j.contains("cross_fidelity")) {
        rep.cross_f = Matrix(rep.n_qubits, rep.n_qubits);
        const auto& cf = j["cross_fidelity"];
        for (unsigned i = 0; i < rep.n_qubits; ++i)
            for (unsigned k = 0; k < rep.n_qubits; ++k) rep.cross_f(i, k) = cf[i][k].get<double>();
    }
    return rep;
}

}  // namespace esprd

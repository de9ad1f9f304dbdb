#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "esprd/core.hpp"

namespace esprd {

// Per-qubit readout signal parameters: one IQ cluster per state {0,1,2} and
// relaxation probabilities for downward transitions during measurement.
struct QubitSignal {
    std::array<Vec2, 3> mean{};
    std::array<Mat2, 3> cov{};
    // decay[s][t] = probability that a qubit prepared in s is emitted as a
    // partially relaxed point toward t, with t < s. Other entries are zero.
    std::array<std::array<double, 3>, 3> decay{};
};

// Ground truth of a simulated N-qubit readout chain.
struct DeviceModel {
    unsigned n_qubits = 0;
    std::uint64_t seed = 0;
    std::vector<QubitSignal> qubits;
    Matrix crosstalk;  // C(i,j): mean shift of qubit i per excitation level of qubit j

    void validate() const {
        if (n_qubits == 0 || qubits.size() != n_qubits)
            throw config_error("device: qubit count mismatch");
        for (unsigned q = 0; q < n_qubits; ++q) {
            for (int s = 0; s < 3; ++s) {
                const Mat2& c = qubits[q].cov[s];
                if (!c.positive_definite())
                    throw config_error("qubits[" + std::to_string(q) + "].covs[" +
                                       std::to_string(s) + "]: covariance not positive definite");
            }
            for (int s = 1; s < 3; ++s) {
                double total = 0.0;
                for (int t = 0; t < s; ++t) {
                    const double p = qubits[q].decay[s][t];
                    if (p < 0.0 || p > 1.0)
                        throw config_error("qubits[" + std::to_string(q) +
                                           "].decay: probability outside [0,1]");
                    total += p;
                }
                if (total > 1.0)
                    throw config_error("qubits[" + std::to_string(q) + "].decay: probabilities from state " +
                                       std::to_string(s) + " sum above 1");
            }
        }
        if (crosstalk.rows() != n_qubits || crosstalk.cols() != n_qubits)
            throw config_error("crosstalk: matrix must be n_qubits x n_qubits");
        for (unsigned i = 0; i < n_qubits; ++i)
            if (crosstalk(i, i) != 0.0)
                throw config_error("crosstalk[" + std::to_string(i) + "][" + std::to_string(i) +
                                   "]: diagonal must be zero");
    }
};

namespace detail {

inline const nlohmann::json& require_key(const nlohmann::json& j, const std::string& key,
                                         const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) throw config_error("missing required key: " + path + key);
    return *it;
}

inline Vec2 parse_vec2(const nlohmann::json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) throw config_error(path + ": expected [I, Q] pair");
    return Vec2{j[0].get<double>(), j[1].get<double>()};
}

inline Mat2 parse_cov(const nlohmann::json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_array() || j[0].size() != 2 ||
        !j[1].is_array() || j[1].size() != 2)
        throw config_error(path + ": expected 2x2 matrix");
    const double a = j[0][0].get<double>(), b = j[0][1].get<double>();
    const double c = j[1][0].get<double>(), d = j[1][1].get<double>();
    if (std::abs(b - c) > 1e-12 * (1.0 + std::abs(b) + std::abs(c)))
        throw config_error(path + ": covariance not symmetric");
    return Mat2{a, 0.5 * (b + c), d};
}

}  // namespace detail

// Parses and validates a device config document. Validation failures are
// rejected, never repaired. Grammar:
//
//   {
//     "format_version": 1,
//     "n_qubits": <int>,
//     "seed": <u64>,
//     "default_variance": <double, optional, default 1.0>,
//     "qubits": [
//       { "means": [[I,Q],[I,Q],[I,Q]],            // states 0,1,2
//         "covs":  [ [[..],[..]], ... ],           // optional, default isotropic
//         "decay": { "1->0": p, "2->1": p, ... } } // optional, default 0
//     ],
//     "crosstalk": [[...], ...]                    // optional NxN, default 0
//   }
inline DeviceModel device_from_json(const nlohmann::json& j) {
    using detail::require_key;
    DeviceModel dev;
    const auto n = require_key(j, "n_qubits", "").get<long long>();
    if (n <= 0) throw config_error("n_qubits: must be positive");
    dev.n_qubits = static_cast<unsigned>(n);
    dev.seed = require_key(j, "seed", "").get<std::uint64_t>();
    const double default_var =
        j.contains("default_variance") ? j["default_variance"].get<double>() : 1.0;

    const auto& qubits = require_key(j, "qubits", "");
    if (!qubits.is_array() || qubits.size() != dev.n_qubits)
        throw config_error("qubits: expected array of n_qubits entries");

    for (unsigned q = 0; q < dev.n_qubits; ++q) {
        const std::string path = "qubits[" + std::to_string(q) + "].";
        const auto& jq = qubits[q];
        QubitSignal sig;
        const auto& means = require_key(jq, "means", path);
        if (!means.is_array() || means.size() != 3)
            throw config_error(path + "means: expected three [I,Q] pairs");
        for (int s = 0; s < 3; ++s) {
            sig.mean[s] = detail::parse_vec2(means[s], path + "means[" + std::to_string(s) + "]");
            sig.cov[s] = Mat2{default_var, 0.0, default_var};
        }
        if (jq.contains("covs")) {
            const auto& covs = jq["covs"];
            if (!covs.is_array() || covs.size() != 3)
                throw config_error(path + "covs: expected three 2x2 matrices");
            for (int s = 0; s < 3; ++s)
                sig.cov[s] = detail::parse_cov(covs[s], path + "covs[" + std::to_string(s) + "]");
        }
        if (jq.contains("decay")) {
            for (const auto& [key, val] : jq["decay"].items()) {
                int from, to;
                if (key.size() != 4 || key.substr(1, 2) != "->" ||
                    (from = key[0] - '0') < 0 || from > 2 || (to = key[3] - '0') < 0 || to > 2 ||
                    to >= from)
                    throw config_error(path + "decay: bad transition key \"" + key +
                                       "\" (expected \"s->t\" with t < s)");
                sig.decay[from][to] = val.get<double>();
            }
        }
        dev.qubits.push_back(sig);
    }

    dev.crosstalk = Matrix(dev.n_qubits, dev.n_qubits, 0.0);
    if (j.contains("crosstalk")) {
        const auto& ct = j["crosstalk"];
        if (!ct.is_array() || ct.size() != dev.n_qubits)
            throw config_error("crosstalk: expected n_qubits rows");
        for (unsigned i = 0; i < dev.n_qubits; ++i) {
            if (!ct[i].is_array() || ct[i].size() != dev.n_qubits)
                throw config_error("crosstalk[" + std::to_string(i) + "]: expected n_qubits columns");
            for (unsigned k = 0; k < dev.n_qubits; ++k) dev.crosstalk(i, k) = ct[i][k].get<double>();
        }
    }

    dev.validate();
    return dev;
}

}  // namespace esprd

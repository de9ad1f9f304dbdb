#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "esprd/core.hpp"
#include "esprd/device.hpp"
#include "esprd/labels.hpp"
#include "esprd/rng.hpp"

namespace esprd {

// One measurement shot: features ordered I_0,Q_0,...,I_{N-1},Q_{N-1}.
struct ShotRecord {
    std::uint64_t prepared_label = 0;
    std::vector<double> features;
};

struct Dataset {
    unsigned n_qubits = 0;
    std::uint64_t shots_per_state = 0;
    std::uint64_t seed = 0;
    std::string provenance;
    std::vector<ShotRecord> records;
};

// Guard against 3^N * shots blowing up; adjustable by callers that know better.
inline constexpr std::uint64_t kMaxDatasetRecords = 1ull << 26;

// Draws one shot for every qubit of a prepared state. The random stream is a
// pure function of (device.seed, prepared_label, shot_index, qubit), so results
// are identical regardless of generation order or thread count.
//
// Per qubit: (1) with probability decay[s][t] the qubit relaxes mid-integration
// and the emitted center is the convex combination lambda*mean_t +
// (1-lambda)*mean_s, lambda ~ U[0,1]; (2) a crosstalk shift sum_j C(i,j)*s_j is
// added to both I and Q; (3) Gaussian noise with the prepared state's
// covariance is added.
inline ShotRecord simulate_shot(const DeviceModel& dev, const std::vector<int>& prepared_digits,
                                std::uint64_t shot_index) {
    if (prepared_digits.size() != dev.n_qubits)
        throw data_error("simulate_shot: digit count != n_qubits");
    ShotRecord rec;
    rec.prepared_label = encode_label(prepared_digits);
    rec.features.resize(2 * dev.n_qubits);

    for (unsigned q = 0; q < dev.n_qubits; ++q) {
        const int s = prepared_digits[q];
        const QubitSignal& sig = dev.qubits[q];
        ShotStream rng(dev.seed, rec.prepared_label, shot_index, q);

        Vec2 center = sig.mean[s];
        if (s > 0) {
            const double u = rng.uniform();
            double cum = 0.0;
            for (int t = s - 1; t >= 0; --t) {
                cum += sig.decay[s][t];
                if (u < cum) {
                    const double lambda = rng.uniform();
                    center.x = lambda * sig.mean[t].x + (1.0 - lambda) * sig.mean[s].x;
                    center.y = lambda * sig.mean[t].y + (1.0 - lambda) * sig.mean[s].y;
                    break;
                }
            }
        }

        double shift = 0.0;
        for (unsigned j = 0; j < dev.n_qubits; ++j)
            shift += dev.crosstalk(q, j) * static_cast<double>(prepared_digits[j]);

        double l00, l10, l11;
        sig.cov[s].cholesky(l00, l10, l11);
        const double z0 = rng.gaussian();
        const double z1 = rng.gaussian();

        rec.features[2 * q] = center.x + shift + l00 * z0;
        rec.features[2 * q + 1] = center.y + shift + l10 * z0 + l11 * z1;
    }
    return rec;
}

// Full state sweep: every prepared label 0..3^N-1, label-major / shot-minor.
inline Dataset simulate_dataset(const DeviceModel& dev, std::uint64_t shots_per_state,
                                std::uint64_t max_records = kMaxDatasetRecords) {
    if (shots_per_state < 1) throw data_error("simulate_dataset: shots_per_state must be >= 1");
    if (dev.n_qubits > 20) throw data_error("simulate_dataset: n_qubits too large for full sweep");
    const std::uint64_t n_states = pow3(dev.n_qubits);
    if (n_states > max_records / shots_per_state)
        throw data_error("simulate_dataset: 3^N * shots exceeds record limit");

    Dataset ds;
    ds.n_qubits = dev.n_qubits;
    ds.shots_per_state = shots_per_state;
    ds.seed = dev.seed;
    ds.provenance = "simulated full state sweep";
    ds.records.reserve(n_states * shots_per_state);
    for (std::uint64_t label = 0; label < n_states; ++label) {
        const auto digits = decode_label(label, dev.n_qubits);
        for (std::uint64_t shot = 0; shot < shots_per_state; ++shot)
            ds.records.push_back(simulate_shot(dev, digits, shot));
    }
    return ds;
}

namespace detail {

// Shortest round-trip decimal form; byte-stable across runs and platforms.
inline void append_double(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

}  // namespace detail

// Dataset file grammar (version 1):
//   line 1: "# esprd-dataset v1"
//   line 2: "# n_qubits=<N> shots_per_state=<S> seed=<U64>"
//   line 3: "# provenance=<free text>"
//   then one record per line: "<label> <I0> <Q0> ... <I(N-1)> <Q(N-1)>",
//   space-delimited, floats in shortest round-trip decimal form.
inline std::string dataset_to_string(const Dataset& ds) {
    std::string out;
    out.reserve(ds.records.size() * 24 * (2 * ds.n_qubits + 1) / 2);
    out += "# esprd-dataset v1\n";
    out += "# n_qubits=" + std::to_string(ds.n_qubits) +
           " shots_per_state=" + std::to_string(ds.shots_per_state) +
           " seed=" + std::to_string(ds.seed) + "\n";
    out += "# provenance=" + ds.provenance + "\n";
    for (const auto& rec : ds.records) {
        out += std::to_string(rec.prepared_label);
        for (double f : rec.features) {
            out += ' ';
            detail::append_double(out, f);
        }
        out += '\n';
    }
    return out;
}

inline Dataset dataset_from_stream(std::istream& in) {
    Dataset ds;
    std::string line;
    if (!std::getline(in, line) || line != "# esprd-dataset v1")
        throw data_error("dataset: bad or missing format header");
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
        throw data_error("dataset: missing metadata line");
    {
        std::istringstream meta(line.substr(2));
        std::string tok;
        while (meta >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = tok.substr(0, eq);
            const std::string val = tok.substr(eq + 1);
            if (key == "n_qubits") ds.n_qubits = static_cast<unsigned>(std::stoul(val));
            else if (key == "shots_per_state") ds.shots_per_state = std::stoull(val);
            else if (key == "seed") ds.seed = std::stoull(val);
        }
    }
    if (ds.n_qubits == 0) throw data_error("dataset: n_qubits missing from metadata");
    if (!std::getline(in, line) || line.rfind("# provenance=", 0) != 0)
        throw data_error("dataset: missing provenance line");
    ds.provenance = line.substr(13);

    const std::size_t dim = 2 * ds.n_qubits;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ShotRecord rec;
        if (!(ls >> rec.prepared_label)) throw data_error("dataset: bad record line");
        rec.features.reserve(dim);
        double v;
        while (ls >> v) rec.features.push_back(v);
        if (rec.features.size() != dim)
            throw data_error("dataset: record has " + std::to_string(rec.features.size()) +
                             " features, expected " + std::to_string(dim));
        if (rec.prepared_label >= pow3(ds.n_qubits))
            throw data_error("dataset: record label out of range");
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

inline Dataset dataset_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open dataset file: " + path);
    return dataset_from_stream(in);
}

}  // namespace esprd

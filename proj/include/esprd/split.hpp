#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "esprd/core.hpp"
#include "esprd/rng.hpp"
#include "esprd/simulate.hpp"

namespace esprd {

struct SplitSpec {
    double train = 0.5;
    double test = 0.3;
    double validation = 0.2;
    std::uint64_t seed = 0;

    void validate() const {
        for (double f : {train, test, validation})
            if (f < 0.0 || f > 1.0) throw data_error("split: fraction outside [0,1]");
        if (std::abs(train + test + validation - 1.0) > 1e-9)
            throw data_error("split: fractions must sum to 1");
    }
};

// Largest-remainder apportionment of n items into the three fractions.
// Remainder ties go to the earlier part.
inline std::array<std::size_t, 3> largest_remainder_counts(std::size_t n, const SplitSpec& spec) {
    const std::array<double, 3> f{spec.train, spec.test, spec.validation};
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> rem{};
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double exact = f[i] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        rem[i] = exact - std::floor(exact);
        assigned += counts[i];
    }
    std::size_t left = n - assigned;
    while (left > 0) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (rem[i] > rem[best]) best = i;
        counts[best]++;
        rem[best] = -1.0;
        --left;
    }
    return counts;
}

struct SplitResult {
    Dataset train;
    Dataset test;
    Dataset validation;
};

// Stratified per prepared label: each label's shots are shuffled with a seed
// derived from (spec.seed, label) and partitioned train | test | validation
// by largest-remainder counts. Union of parts equals the input, parts disjoint.
inline SplitResult split_dataset(const Dataset& ds, const SplitSpec& spec) {
    spec.validate();
    std::map<std::uint64_t, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < ds.records.size(); ++i)
        by_label[ds.records[i].prepared_label].push_back(i);

    SplitResult out;
    for (Dataset* part : {&out.train, &out.test, &out.validation}) {
        part->n_qubits = ds.n_qubits;
        part->shots_per_state = ds.shots_per_state;
        part->seed = ds.seed;
    }
    out.train.provenance = ds.provenance + "; split=train";
    out.test.provenance = ds.provenance + "; split=test";
    out.validation.provenance = ds.provenance + "; split=validation";

    for (auto& [label, idx] : by_label) {
        deterministic_shuffle(idx, mix64(spec.seed) ^ mix64(label + 1));
        const auto counts = largest_remainder_counts(idx.size(), spec);
        std::size_t pos = 0;
        Dataset* parts[3] = {&out.train, &out.test, &out.validation};
        for (int p = 0; p < 3; ++p)
            for (std::size_t k = 0; k < counts[p]; ++k) parts[p]->records.push_back(ds.records[idx[pos++]]);
    }
    return out;
}

}  // namespace esprd

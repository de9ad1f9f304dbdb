#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "esprd/core.hpp"

namespace esprd {

// State labels are flat base-3 integers over the N-qubit ket string, with the
// rightmost ket digit least significant: |22102> -> 2*3^0 + 0*3^1 + 1*3^2 +
// 2*3^3 + 2*3^4 = 227.

inline std::uint64_t encode_label(const std::vector<int>& ket_digits) {
    std::uint64_t label = 0;
    for (int d : ket_digits) {
        if (d < 0 || d > 2) throw data_error("label digit outside {0,1,2}: " + std::to_string(d));
        label = label * 3 + static_cast<std::uint64_t>(d);
    }
    return label;
}

inline std::vector<int> decode_label(std::uint64_t label, unsigned n_qubits) {
    if (label >= pow3(n_qubits))
        throw data_error("label " + std::to_string(label) + " out of range for " +
                         std::to_string(n_qubits) + " qubits");
    std::vector<int> digits(n_qubits, 0);
    for (unsigned k = 0; k < n_qubits; ++k) {
        digits[n_qubits - 1 - k] = static_cast<int>(label % 3);
        label /= 3;
    }
    return digits;
}

inline std::vector<double> one_hot(std::uint64_t label, std::size_t num_classes) {
    if (label >= num_classes)
        throw data_error("one-hot label " + std::to_string(label) + " >= " +
                         std::to_string(num_classes));
    std::vector<double> v(num_classes, 0.0);
    v[label] = 1.0;
    return v;
}

inline std::string ket_string(const std::vector<int>& digits) {
    std::string s = "|";
    for (int d : digits) s += static_cast<char>('0' + d);
    s += ">";
    return s;
}

}  // namespace esprd

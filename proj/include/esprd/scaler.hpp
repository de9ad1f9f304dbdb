#pragma once

#include <cmath>
#include <vector>

#include <json.hpp>

#include "esprd/core.hpp"

namespace esprd {

inline constexpr double kStdFloor = 1e-12;

// Per-column standardization parameters. Stored stds are floored at kStdFloor;
// a constant column therefore maps to exact zeros (x - mean is exactly 0).
struct ScalerParams {
    std::vector<double> mean;
    std::vector<double> std_dev;
};

inline ScalerParams fit_scaler(const Matrix& x) {
    if (x.rows() < 2) throw data_error("fit_scaler: need at least 2 rows");
    ScalerParams p;
    const std::size_t d = x.cols();
    const double m = static_cast<double>(x.rows());
    p.mean.assign(d, 0.0);
    p.std_dev.assign(d, 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < d; ++c) p.mean[c] += x(r, c);
    for (std::size_t c = 0; c < d; ++c) p.mean[c] /= m;
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < d; ++c) {
            const double dv = x(r, c) - p.mean[c];
            p.std_dev[c] += dv * dv;
        }
    for (std::size_t c = 0; c < d; ++c) p.std_dev[c] = std::max(std::sqrt(p.std_dev[c] / m), kStdFloor);
    return p;
}

inline Matrix apply_scaler(const ScalerParams& p, const Matrix& x) {
    if (x.cols() != p.mean.size()) throw data_error("apply_scaler: dimension mismatch");
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c)
            out(r, c) = (x(r, c) - p.mean[c]) / p.std_dev[c];
    return out;
}

inline nlohmann::json scaler_to_json(const ScalerParams& p) {
    return nlohmann::json{{"format_version", 1}, {"mean", p.mean}, {"std", p.std_dev}};
}

inline ScalerParams scaler_from_json(const nlohmann::json& j) {
    ScalerParams p;
    p.mean = j.at("mean").get<std::vector<double>>();
    p.std_dev = j.at("std").get<std::vector<double>>();
    if (p.mean.size() != p.std_dev.size()) throw data_error("scaler: mean/std size mismatch");
    for (double s : p.std_dev)
        if (s < kStdFloor) throw data_error("scaler: std below floor");
    return p;
}

}  // namespace esprd

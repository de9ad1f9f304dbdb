#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "esprd/core.hpp"

namespace esprd {

namespace detail {

struct GaussFit2D {
    Vec2 center;
    Mat2 cov;
};

inline GaussFit2D fit_gauss(const std::vector<Vec2>& pts, const std::vector<std::size_t>& idx) {
    GaussFit2D f;
    const double n = static_cast<double>(idx.size());
    for (std::size_t i : idx) {
        f.center.x += pts[i].x;
        f.center.y += pts[i].y;
    }
    f.center.x /= n;
    f.center.y /= n;
    for (std::size_t i : idx) {
        const double dx = pts[i].x - f.center.x;
        const double dy = pts[i].y - f.center.y;
        f.cov.xx += dx * dx;
        f.cov.xy += dx * dy;
        f.cov.yy += dy * dy;
    }
    f.cov.xx /= n;
    f.cov.xy /= n;
    f.cov.yy /= n;
    return f;
}

inline std::vector<double> mahalanobis_sq(const std::vector<Vec2>& pts, const GaussFit2D& f) {
    const double det = f.cov.det();
    if (det <= 1e-300) throw data_error("remove_outliers: degenerate covariance after robust fit");
    const double ixx = f.cov.yy / det, ixy = -f.cov.xy / det, iyy = f.cov.xx / det;
    std::vector<double> d2(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double dx = pts[i].x - f.center.x;
        const double dy = pts[i].y - f.center.y;
        d2[i] = dx * (ixx * dx + ixy * dy) + dy * (ixy * dx + iyy * dy);
    }
    return d2;
}

}  // namespace detail

// Elliptic-envelope outlier mask via a minimum-covariance-determinant style
// concentration: repeatedly refit a Gaussian to the half-sample with smallest
// Mahalanobis distances until the covariance determinant stops decreasing
// (max 30 iterations), then flag the ceil(contamination*M) points farthest
// from the final robust estimate. Returns a keep-mask.
inline std::vector<bool> remove_outliers(const std::vector<Vec2>& pts, double contamination) {
    const std::size_t m = pts.size();
    if (contamination < 0.0 || contamination >= 0.5)
        throw data_error("remove_outliers: contamination must be in [0, 0.5)");
    if (contamination == 0.0) return std::vector<bool>(m, true);
    if (m < 10) throw data_error("remove_outliers: need at least 10 points");

    const std::size_t h = m / 2 + 1;  // half-sample size
    std::vector<std::size_t> subset(m);
    std::iota(subset.begin(), subset.end(), 0);

    detail::GaussFit2D fit = detail::fit_gauss(pts, subset);
    double best_det = fit.cov.det();
    for (int iter = 0; iter < 30; ++iter) {
        const auto d2 = detail::mahalanobis_sq(pts, fit);
        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return d2[a] != d2[b] ? d2[a] < d2[b] : a < b;
        });
        order.resize(h);
        const detail::GaussFit2D next = detail::fit_gauss(pts, order);
        const double det = next.cov.det();
        if (det <= 1e-300) throw data_error("remove_outliers: degenerate covariance after robust fit");
        if (det >= best_det) break;
        best_det = det;
        fit = next;
    }

    const auto d2 = detail::mahalanobis_sq(pts, fit);
    const std::size_t n_out =
        std::min(m, static_cast<std::size_t>(std::ceil(contamination * static_cast<double>(m))));
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return d2[a] != d2[b] ? d2[a] > d2[b] : a < b;
    });
    std::vector<bool> keep(m, true);
    for (std::size_t i = 0; i < n_out; ++i) keep[order[i]] = false;
    return keep;
}

}  // namespace esprd

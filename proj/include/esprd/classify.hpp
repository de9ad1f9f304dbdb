#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "esprd/core.hpp"

namespace esprd {

enum class ModelKind { knn, dtc, gnb, lda, qda };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::knn: return "knn";
        case ModelKind::dtc: return "dtc";
        case ModelKind::gnb: return "gnb";
        case ModelKind::lda: return "lda";
        case ModelKind::qda: return "qda";
    }
    return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "knn") return ModelKind::knn;
    if (s == "dtc") return ModelKind::dtc;
    if (s == "gnb") return ModelKind::gnb;
    if (s == "lda") return ModelKind::lda;
    if (s == "qda") return ModelKind::qda;
    throw config_error("unknown model kind: " + s);
}

struct ClassifierSpec {
    ModelKind kind = ModelKind::gnb;
    int k = 50;                  // knn neighbor count; distance is always L1
    int max_depth = 20;          // dtc; split quality measured by entropy
    int min_samples_split = 2;   // dtc
    double var_floor = 1e-9;     // gnb/lda/qda covariance flooring

    void validate() const {
        if (k < 1) throw config_error("classifier: k must be >= 1");
        if (max_depth < 1) throw config_error("classifier: max_depth must be >= 1");
        if (min_samples_split < 2) throw config_error("classifier: min_samples_split must be >= 2");
        if (var_floor <= 0.0) throw config_error("classifier: var_floor must be positive");
    }
};

// --- learned parameter blocks per kind (labels stored as class indices) ---

struct KnnParams {
    Matrix train_x;
    std::vector<int> train_y;
};

struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf = -1;  // class index; >= 0 iff this is a leaf
};

struct TreeParams {
    std::vector<TreeNode> nodes;
};

struct GnbParams {
    std::vector<double> log_prior;  // K
    Matrix mean;                    // K x D
    Matrix var;                     // K x D, floored
};

// LDA/QDA store the Cholesky factor(s) of the (floored) covariance(s).
struct LdaParams {
    std::vector<double> log_prior;
    Matrix mean;
    Matrix chol;  // D x D lower factor of the pooled covariance
    double log_det = 0.0;
};

struct QdaParams {
    std::vector<double> log_prior;
    Matrix mean;
    std::vector<Matrix> chol;  // per class
    std::vector<double> log_det;
};

struct TrainedModel {
    ClassifierSpec spec;
    std::vector<std::uint64_t> classes;  // sorted; class index -> label
    std::size_t dim = 0;
    double fit_seconds = 0.0;
    std::variant<KnnParams, TreeParams, GnbParams, LdaParams, QdaParams> params;
};

namespace detail {

// In-place lower Cholesky of a symmetric matrix; returns false if not SPD.
inline bool try_cholesky(Matrix& a) {
    const std::size_t d = a.rows();
    for (std::size_t j = 0; j < d; ++j) {
        double s = a(j, j);
        for (std::size_t k = 0; k < j; ++k) s -= a(j, k) * a(j, k);
        if (s <= 0.0) return false;
        a(j, j) = std::sqrt(s);
        for (std::size_t i = j + 1; i < d; ++i) {
            double t = a(i, j);
            for (std::size_t k = 0; k < j; ++k) t -= a(i, k) * a(j, k);
            a(i, j) = t / a(j, j);
        }
        for (std::size_t k = j + 1; k < d; ++k) a(j, k) = 0.0;
    }
    return true;
}

// Cholesky with escalating diagonal jitter starting at var_floor. The
// 3^N-class task can leave thin classes after splitting; flooring beats
// failing there.
inline Matrix floored_cholesky(const Matrix& cov, double var_floor, double& log_det) {
    double jitter = 0.0;
    for (int attempt = 0; attempt < 40; ++attempt) {
        Matrix a = cov;
        for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += jitter;
        if (try_cholesky(a)) {
            log_det = 0.0;
            for (std::size_t i = 0; i < a.rows(); ++i) log_det += 2.0 * std::log(a(i, i));
            return a;
        }
        jitter = jitter == 0.0 ? var_floor : jitter * 10.0;
    }
    throw fit_error("covariance could not be made positive definite");
}

// Squared Mahalanobis norm ||L^-1 (x - mu)||^2 by forward substitution.
inline double mahalanobis_sq(const Matrix& chol, const double* x, const double* mu,
                             std::vector<double>& scratch) {
    const std::size_t d = chol.rows();
    scratch.resize(d);
    double q = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double t = x[i] - mu[i];
        for (std::size_t k = 0; k < i; ++k) t -= chol(i, k) * scratch[k];
        scratch[i] = t / chol(i, i);
        q += scratch[i] * scratch[i];
    }
    return q;
}

inline double entropy_bits(const std::vector<std::size_t>& counts, std::size_t total) {
    if (total == 0) return 0.0;
    double h = 0.0;
    const double n = static_cast<double>(total);
    for (std::size_t c : counts)
        if (c > 0) {
            const double p = static_cast<double>(c) / n;
            h -= p * std::log2(p);
        }
    return h;
}

inline int majority_class(const std::vector<std::size_t>& counts) {
    int best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c)
        if (counts[c] > counts[best]) best = static_cast<int>(c);
    return best;
}

struct TreeBuilder {
    const Matrix& x;
    const std::vector<int>& y;
    std::size_t n_classes;
    const ClassifierSpec& spec;
    std::vector<TreeNode> nodes;

    int build(std::vector<std::size_t>& idx, int depth) {
        std::vector<std::size_t> counts(n_classes, 0);
        for (std::size_t i : idx) counts[y[i]]++;
        const double parent_h = entropy_bits(counts, idx.size());

        const bool stop = depth >= spec.max_depth ||
                          idx.size() < static_cast<std::size_t>(spec.min_samples_split) ||
                          parent_h == 0.0;
        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = 0.0;

        if (!stop) {
            std::vector<std::pair<double, int>> vals(idx.size());
            std::vector<std::size_t> left(n_classes);
            for (std::size_t f = 0; f < x.cols(); ++f) {
                for (std::size_t i = 0; i < idx.size(); ++i)
                    vals[i] = {x(idx[i], f), y[idx[i]]};
                std::sort(vals.begin(), vals.end(),
                          [](const auto& a, const auto& b) { return a.first < b.first; });
                std::fill(left.begin(), left.end(), 0);
                for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                    left[vals[i].second]++;
                    if (vals[i].first == vals[i + 1].first) continue;
                    const std::size_t nl = i + 1, nr = vals.size() - nl;
                    std::vector<std::size_t> right(n_classes);
                    for (std::size_t c = 0; c < n_classes; ++c) right[c] = counts[c] - left[c];
                    const double gain =
                        parent_h - (static_cast<double>(nl) * entropy_bits(left, nl) +
                                    static_cast<double>(nr) * entropy_bits(right, nr)) /
                                       static_cast<double>(vals.size());
                    // strict > keeps the lexicographically first (feature,
                    // threshold) among equal-gain splits
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_feature = static_cast<int>(f);
                        best_threshold = 0.5 * (vals[i].first + vals[i + 1].first);
                    }
                }
            }
        }

        if (best_feature < 0) {
            TreeNode leaf;
            leaf.leaf = majority_class(counts);
            nodes.push_back(leaf);
            return static_cast<int>(nodes.size()) - 1;
        }

        std::vector<std::size_t> li, ri;
        for (std::size_t i : idx)
            (x(i, best_feature) < best_threshold ? li : ri).push_back(i);
        idx.clear();
        idx.shrink_to_fit();

        const int self = static_cast<int>(nodes.size());
        nodes.emplace_back();
        nodes[self].feature = best_feature;
        nodes[self].threshold = best_threshold;
        const int l = build(li, depth + 1);
        const int r = build(ri, depth + 1);
        nodes[self].left = l;
        nodes[self].right = r;
        return self;
    }
};

inline void check_features(const Matrix& x, std::size_t dim, const char* op) {
    if (x.cols() != dim) throw data_error(std::string(op) + ": feature dimension mismatch");
    if (!x.all_finite()) throw data_error(std::string(op) + ": non-finite feature values");
}

// Class scores (log prior + log likelihood) for the three Gaussian models.
inline void gaussian_scores(const TrainedModel& m, const double* row, std::vector<double>& scores) {
    const std::size_t kk = m.classes.size();
    const std::size_t d = m.dim;
    scores.assign(kk, 0.0);
    static thread_local std::vector<double> scratch;
    if (const auto* g = std::get_if<GnbParams>(&m.params)) {
        constexpr double log2pi = 1.8378770664093454836;
        for (std::size_t c = 0; c < kk; ++c) {
            double s = g->log_prior[c];
            for (std::size_t f = 0; f < d; ++f) {
                const double v = g->var(c, f);
                const double dv = row[f] - g->mean(c, f);
                s -= 0.5 * (log2pi + std::log(v) + dv * dv / v);
            }
            scores[c] = s;
        }
    } else if (const auto* l = std::get_if<LdaParams>(&m.params)) {
        for (std::size_t c = 0; c < kk; ++c)
            scores[c] = l->log_prior[c] -
                        0.5 * (l->log_det + mahalanobis_sq(l->chol, row, l->mean.row_ptr(c), scratch));
    } else if (const auto* q = std::get_if<QdaParams>(&m.params)) {
        for (std::size_t c = 0; c < kk; ++c)
            scores[c] = q->log_prior[c] -
                        0.5 * (q->log_det[c] +
                               mahalanobis_sq(q->chol[c], row, q->mean.row_ptr(c), scratch));
    } else {
        throw unsupported_error("class probabilities are not defined for " + to_string(m.spec.kind));
    }
}

}  // namespace detail

inline TrainedModel fit(const ClassifierSpec& spec, const Matrix& x, const std::vector<std::uint64_t>& y) {
    spec.validate();
    const auto t0 = std::chrono::steady_clock::now();
    if (x.rows() == 0 || x.cols() == 0) throw fit_error("fit: empty training data");
    if (x.rows() != y.size()) throw fit_error("fit: feature/label count mismatch");
    if (!x.all_finite()) throw fit_error("fit: non-finite feature values");

    TrainedModel m;
    m.spec = spec;
    m.dim = x.cols();
    m.classes = y;
    std::sort(m.classes.begin(), m.classes.end());
    m.classes.erase(std::unique(m.classes.begin(), m.classes.end()), m.classes.end());
    const std::size_t kk = m.classes.size();

    std::vector<int> yi(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        yi[i] = static_cast<int>(std::lower_bound(m.classes.begin(), m.classes.end(), y[i]) -
                                 m.classes.begin());

    const std::size_t mrows = x.rows();
    const std::size_t d = x.cols();
    std::vector<std::size_t> class_count(kk, 0);
    for (int c : yi) class_count[c]++;

    switch (spec.kind) {
        case ModelKind::knn: {
            m.params = KnnParams{x, yi};
            break;
        }
        case ModelKind::dtc: {
            detail::TreeBuilder builder{x, yi, kk, spec, {}};
            std::vector<std::size_t> idx(mrows);
            std::iota(idx.begin(), idx.end(), 0);
            builder.build(idx, 0);
            m.params = TreeParams{std::move(builder.nodes)};
            break;
        }
        case ModelKind::gnb: {
            GnbParams p;
            p.log_prior.resize(kk);
            p.mean = Matrix(kk, d);
            p.var = Matrix(kk, d);
            for (std::size_t i = 0; i < mrows; ++i)
                for (std::size_t f = 0; f < d; ++f) p.mean(yi[i], f) += x(i, f);
            for (std::size_t c = 0; c < kk; ++c)
                for (std::size_t f = 0; f < d; ++f) p.mean(c, f) /= static_cast<double>(class_count[c]);
            for (std::size_t i = 0; i < mrows; ++i)
                for (std::size_t f = 0; f < d; ++f) {
                    const double dv = x(i, f) - p.mean(yi[i], f);
                    p.var(yi[i], f) += dv * dv;
                }
            for (std::size_t c = 0; c < kk; ++c) {
                p.log_prior[c] = std::log(static_cast<double>(class_count[c]) /
                                          static_cast<double>(mrows));
                for (std::size_t f = 0; f < d; ++f)
                    p.var(c, f) = std::max(p.var(c, f) / static_cast<double>(class_count[c]),
                                           spec.var_floor);
            }
            m.params = std::move(p);
            break;
        }
        case ModelKind::lda:
        case ModelKind::qda: {
            Matrix mean(kk, d);
            for (std::size_t i = 0; i < mrows; ++i)
                for (std::size_t f = 0; f < d; ++f) mean(yi[i], f) += x(i, f);
            for (std::size_t c = 0; c < kk; ++c)
                for (std::size_t f = 0; f < d; ++f) mean(c, f) /= static_cast<double>(class_count[c]);
            std::vector<double> log_prior(kk);
            for (std::size_t c = 0; c < kk; ++c)
                log_prior[c] = std::log(static_cast<double>(class_count[c]) /
                                        static_cast<double>(mrows));

            if (spec.kind == ModelKind::lda) {
                Matrix pooled(d, d);
                std::vector<double> dv(d);
                for (std::size_t i = 0; i < mrows; ++i) {
                    for (std::size_t f = 0; f < d; ++f) dv[f] = x(i, f) - mean(yi[i], f);
                    for (std::size_t a = 0; a < d; ++a)
                        for (std::size_t b = 0; b <= a; ++b) pooled(a, b) += dv[a] * dv[b];
                }
                for (std::size_t a = 0; a < d; ++a)
                    for (std::size_t b = 0; b <= a; ++b) {
                        pooled(a, b) /= static_cast<double>(mrows);
                        pooled(b, a) = pooled(a, b);
                    }
                LdaParams p;
                p.log_prior = std::move(log_prior);
                p.mean = std::move(mean);
                p.chol = detail::floored_cholesky(pooled, spec.var_floor, p.log_det);
                m.params = std::move(p);
            } else {
                QdaParams p;
                p.log_prior = std::move(log_prior);
                p.mean = mean;
                p.chol.resize(kk);
                p.log_det.resize(kk);
                std::vector<double> dv(d);
                for (std::size_t c = 0; c < kk; ++c) {
                    Matrix cov(d, d);
                    for (std::size_t i = 0; i < mrows; ++i) {
                        if (static_cast<std::size_t>(yi[i]) != c) continue;
                        for (std::size_t f = 0; f < d; ++f) dv[f] = x(i, f) - mean(c, f);
                        for (std::size_t a = 0; a < d; ++a)
                            for (std::size_t b = 0; b <= a; ++b) cov(a, b) += dv[a] * dv[b];
                    }
                    for (std::size_t a = 0; a < d; ++a)
                        for (std::size_t b = 0; b <= a; ++b) {
                            cov(a, b) /= static_cast<double>(class_count[c]);
                            cov(b, a) = cov(a, b);
                        }
                    p.chol[c] = detail::floored_cholesky(cov, spec.var_floor, p.log_det[c]);
                }
                m.params = std::move(p);
            }
            break;
        }
    }

    m.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return m;
}

inline std::vector<std::uint64_t> predict(const TrainedModel& m, const Matrix& x) {
    detail::check_features(x, m.dim, "predict");
    const std::size_t kk = m.classes.size();
    std::vector<std::uint64_t> out(x.rows());

    if (const auto* knn = std::get_if<KnnParams>(&m.params)) {
        const std::size_t n_train = knn->train_x.rows();
        const std::size_t k = std::min<std::size_t>(m.spec.k, n_train);
        std::vector<std::pair<double, std::size_t>> dist(n_train);
        std::vector<std::size_t> votes(kk);
        for (std::size_t r = 0; r < x.rows(); ++r) {
            const double* q = x.row_ptr(r);
            for (std::size_t t = 0; t < n_train; ++t) {
                const double* p = knn->train_x.row_ptr(t);
                double dsum = 0.0;
                for (std::size_t f = 0; f < m.dim; ++f) dsum += std::abs(q[f] - p[f]);
                dist[t] = {dsum, t};
            }
            // equal distances resolve to the lowest training index
            std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
            std::fill(votes.begin(), votes.end(), 0);
            for (std::size_t i = 0; i < k; ++i) votes[knn->train_y[dist[i].second]]++;
            out[r] = m.classes[detail::majority_class(votes)];
        }
    } else if (const auto* tree = std::get_if<TreeParams>(&m.params)) {
        for (std::size_t r = 0; r < x.rows(); ++r) {
            int node = 0;
            while (tree->nodes[node].leaf < 0) {
                const TreeNode& nd = tree->nodes[node];
                node = x(r, nd.feature) < nd.threshold ? nd.left : nd.right;
            }
            out[r] = m.classes[tree->nodes[node].leaf];
        }
    } else {
        std::vector<double> scores;
        for (std::size_t r = 0; r < x.rows(); ++r) {
            detail::gaussian_scores(m, x.row_ptr(r), scores);
            std::size_t best = 0;
            for (std::size_t c = 1; c < kk; ++c)
                if (scores[c] > scores[best]) best = c;  // ties keep the smaller label
            out[r] = m.classes[best];
        }
    }
    return out;
}

// Softmax-normalized posteriors from the log-joint scores. Defined for the
// Gaussian models only; knn/dtc raise unsupported_error.
inline Matrix predict_proba(const TrainedModel& m, const Matrix& x) {
    detail::check_features(x, m.dim, "predict_proba");
    if (m.spec.kind == ModelKind::knn || m.spec.kind == ModelKind::dtc)
        throw unsupported_error("predict_proba is not supported for " + to_string(m.spec.kind));
    const std::size_t kk = m.classes.size();
    Matrix out(x.rows(), kk);
    std::vector<double> scores;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        detail::gaussian_scores(m, x.row_ptr(r), scores);
        const double hi = *std::max_element(scores.begin(), scores.end());
        double sum = 0.0;
        for (std::size_t c = 0; c < kk; ++c) {
            out(r, c) = std::exp(scores[c] - hi);
            sum += out(r, c);
        }
        for (std::size_t c = 0; c < kk; ++c) out(r, c) /= sum;
    }
    return out;
}

// --- serialization (versioned; lets metrics runs re-execute without refitting) ---

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < m.rows(); ++r)
        rows.push_back(std::vector<double>(m.row_ptr(r), m.row_ptr(r) + m.cols()));
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    const std::size_t rows = j.size();
    const std::size_t cols = rows ? j[0].size() : 0;
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (j[r].size() != cols) throw data_error("model artifact: ragged matrix");
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

}  // namespace detail

inline nlohmann::json model_to_json(const TrainedModel& m) {
    // wall-clock fit time is deliberately not serialized: artifacts must be
    // byte-identical across reruns with the same seeds
    nlohmann::json j{{"format_version", 1},
                     {"kind", to_string(m.spec.kind)},
                     {"classes", m.classes},
                     {"dim", m.dim},
                     {"spec",
                      {{"k", m.spec.k},
                       {"max_depth", m.spec.max_depth},
                       {"min_samples_split", m.spec.min_samples_split},
                       {"var_floor", m.spec.var_floor}}}};
    nlohmann::json p;
    if (const auto* knn = std::get_if<KnnParams>(&m.params)) {
        p["train_x"] = detail::matrix_to_json(knn->train_x);
        p["train_y"] = knn->train_y;
    } else if (const auto* tree = std::get_if<TreeParams>(&m.params)) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const TreeNode& nd : tree->nodes)
            nodes.push_back({{"f", nd.feature},
                             {"t", nd.threshold},
                             {"l", nd.left},
                             {"r", nd.right},
                             {"leaf", nd.leaf}});
        p["nodes"] = std::move(nodes);
    } else if (const auto* g = std::get_if<GnbParams>(&m.params)) {
        p["log_prior"] = g->log_prior;
        p["mean"] = detail::matrix_to_json(g->mean);
        p["var"] = detail::matrix_to_json(g->var);
    } else if (const auto* l = std::get_if<LdaParams>(&m.params)) {
        p["log_prior"] = l->log_prior;
        p["mean"] = detail::matrix_to_json(l->mean);
        p["chol"] = detail::matrix_to_json(l->chol);
        p["log_det"] = l->log_det;
    } else if (const auto* q = std::get_if<QdaParams>(&m.params)) {
        p["log_prior"] = q->log_prior;
        p["mean"] = detail::matrix_to_json(q->mean);
        nlohmann::json chols = nlohmann::json::array();
        for (const Matrix& c : q->chol) chols.push_back(detail::matrix_to_json(c));
        p["chol"] = std::move(chols);
        p["log_det"] = q->log_det;
    }
    j["params"] = std::move(p);
    return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
    if (j.value("format_version", 0) != 1) throw data_error("model artifact: unsupported version");
    TrainedModel m;
    m.spec.kind = model_kind_from_string(j.at("kind").get<std::string>());
    const auto& s = j.at("spec");
    m.spec.k = s.at("k").get<int>();
    m.spec.max_depth = s.at("max_depth").get<int>();
    m.spec.min_samples_split = s.at("min_samples_split").get<int>();
    m.spec.var_floor = s.at("var_floor").get<double>();
    m.classes = j.at("classes").get<std::vector<std::uint64_t>>();
    m.dim = j.at("dim").get<std::size_t>();
    m.fit_seconds = j.value("fit_seconds", 0.0);
    const auto& p = j.at("params");
    switch (m.spec.kind) {
        case ModelKind::knn: {
            KnnParams kp;
            kp.train_x = detail::matrix_from_json(p.at("train_x"));
            kp.train_y = p.at("train_y").get<std::vector<int>>();
            m.params = std::move(kp);
            break;
        }
        case ModelKind::dtc: {
            TreeParams tp;
            for (const auto& nd : p.at("nodes")) {
                TreeNode n;
                n.feature = nd.at("f").get<int>();
                n.threshold = nd.at("t").get<double>();
                n.left = nd.at("l").get<int>();
                n.right = nd.at("r").get<int>();
                n.leaf = nd.at("leaf").get<int>();
                tp.nodes.push_back(n);
            }
            m.params = std::move(tp);
            break;
        }
        case ModelKind::gnb: {
            GnbParams gp;
            gp.log_prior = p.at("log_prior").get<std::vector<double>>();
            gp.mean = detail::matrix_from_json(p.at("mean"));
            gp.var = detail::matrix_from_json(p.at("var"));
            m.params = std::move(gp);
            break;
        }
        case ModelKind::lda: {
            LdaParams lp;
            lp.log_prior = p.at("log_prior").get<std::vector<double>>();
            lp.mean = detail::matrix_from_json(p.at("mean"));
            lp.chol = detail::matrix_from_json(p.at("chol"));
            lp.log_det = p.at("log_det").get<double>();
            m.params = std::move(lp);
            break;
        }
        case ModelKind::qda: {
            QdaParams qp;
            qp.log_prior = p.at("log_prior").get<std::vector<double>>();
            qp.mean = detail::matrix_from_json(p.at("mean"));
            for (const auto& c : p.at("chol")) qp.chol.push_back(detail::matrix_from_json(c));
            qp.log_det = p.at("log_det").get<std::vector<double>>();
            m.params = std::move(qp);
            break;
        }
    }
    return m;
}

}  // namespace esprd

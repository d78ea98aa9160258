#pragma once

// Aggregative quantification methods: classify-and-count and its adjusted /
// probabilistic variants, threshold-selection heuristics for the binary
// adjustment, the expectation-maximization quantifier, and the Hellinger
// distance mixture method.
//
// Each method exists twice: as a free function over plain vectors/matrices
// (the algorithmic core, directly testable against oracles) and as a
// Quantifier wrapping a learner and the validation-split machinery.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quantkit/classify.hpp"
#include "quantkit/core.hpp"
#include "quantkit/data.hpp"
#include "quantkit/quantifier.hpp"

namespace quantkit {

// Seed for the internal validation splits of CV-backed quantifiers; fixed so
// that identical (data, params) always produce identical fits.
inline constexpr std::uint64_t kValSplitSeed = 0xACCu;

inline constexpr double kDenominatorTol = 1e-6;
inline constexpr double kConditionLimit = 1e8;

// ---------------------------------------------------------------------------
// Classify & count / probabilistic classify & count
// ---------------------------------------------------------------------------

inline PrevalenceVector cc_from_labels(std::span<const std::size_t> predicted, std::size_t c) {
    if (predicted.empty()) throw std::invalid_argument("cc_from_labels: empty predictions");
    PrevalenceVector p(c, 0.0);
    for (std::size_t id : predicted) {
        if (id >= c) throw std::out_of_range("cc_from_labels: prediction out of range");
        p[id] += 1.0;
    }
    for (double& v : p) v /= static_cast<double>(predicted.size());
    return p;
}

// Column-wise mean of posterior rows.
inline PrevalenceVector pcc_from_posteriors(const Matrix& posteriors, std::span<const std::size_t> indices) {
    if (indices.empty()) throw std::invalid_argument("pcc_from_posteriors: empty selection");
    PrevalenceVector p(posteriors.cols, 0.0);
    for (std::size_t i : indices) {
        const auto row = posteriors.row(i);
        for (std::size_t k = 0; k < p.size(); ++k) p[k] += row[k];
    }
    for (double& v : p) v /= static_cast<double>(indices.size());
    return p;
}

inline PrevalenceVector pcc_from_posteriors(const Matrix& posteriors) {
    std::vector<std::size_t> all(posteriors.rows);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return pcc_from_posteriors(posteriors, all);
}

// ---------------------------------------------------------------------------
// Conditional rates and the ACC/PACC adjustment
// ---------------------------------------------------------------------------

// Per-true-category classifier behaviour. Hard mode: M[i][j] = P(pred=i|true=j)
// from crisp predictions; soft mode: M[i][j] = mean posterior for category i
// over validation items of true category j. Columns sum to 1.
struct ConditionalRates {
    Matrix m;  // c x c

    std::size_t num_categories() const { return m.rows; }
    double tpr() const { return m.at(1, 1); }
    double fpr() const { return m.at(1, 0); }

    static ConditionalRates hard(std::span<const std::size_t> predicted, std::span<const std::size_t> true_ids,
                                 std::size_t c) {
        if (predicted.size() != true_ids.size() || predicted.empty())
            throw std::invalid_argument("ConditionalRates::hard: bad input lengths");
        Matrix m(c, c, 0.0);
        std::vector<double> totals(c, 0.0);
        for (std::size_t i = 0; i < predicted.size(); ++i) {
            m.at(predicted[i], true_ids[i]) += 1.0;
            totals[true_ids[i]] += 1.0;
        }
        finalize_columns(m, totals);
        return {std::move(m)};
    }

    static ConditionalRates soft(const Matrix& posteriors, std::span<const std::size_t> true_ids) {
        if (posteriors.rows != true_ids.size() || posteriors.rows == 0)
            throw std::invalid_argument("ConditionalRates::soft: bad input lengths");
        const std::size_t c = posteriors.cols;
        Matrix m(c, c, 0.0);
        std::vector<double> totals(c, 0.0);
        for (std::size_t i = 0; i < posteriors.rows; ++i) {
            const auto row = posteriors.row(i);
            for (std::size_t k = 0; k < c; ++k) m.at(k, true_ids[i]) += row[k];
            totals[true_ids[i]] += 1.0;
        }
        finalize_columns(m, totals);
        return {std::move(m)};
    }

private:
    static void finalize_columns(Matrix& m, const std::vector<double>& totals) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (totals[j] == 0.0)
                throw std::runtime_error("ConditionalRates: validation data holds no items of category " +
                                         std::to_string(j));
            for (std::size_t i = 0; i < m.rows; ++i) m.at(i, j) /= totals[j];
        }
    }
};

namespace detail {

// Eigenvalues of a small symmetric matrix via cyclic Jacobi rotations.
inline std::vector<double> symmetric_eigenvalues(Matrix a) {
    const std::size_t n = a.rows;
    for (int sweep = 0; sweep < 128; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
        if (off < 1e-28) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);
                a.at(p, p) -= t * apq;
                a.at(q, q) += t * apq;
                a.at(p, q) = 0.0;
                a.at(q, p) = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (i == p || i == q) continue;
                    const double aip = a.at(i, p), aiq = a.at(i, q);
                    a.at(i, p) = aip - s * (aiq + tau * aip);
                    a.at(p, i) = a.at(i, p);
                    a.at(i, q) = aiq + s * (aip - tau * aiq);
                    a.at(q, i) = a.at(i, q);
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a.at(i, i);
    return eig;
}

// Gaussian elimination with partial pivoting; nullopt on a vanishing pivot.
inline std::optional<std::vector<double>> solve_linear(Matrix a, std::vector<double> b) {
    const std::size_t n = a.rows;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a.at(r, col)) > std::abs(a.at(pivot, col))) pivot = r;
        if (std::abs(a.at(pivot, col)) < 1e-300) return std::nullopt;
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a.at(pivot, j), a.at(col, j));
            std::swap(b[pivot], b[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a.at(r, col) / a.at(col, col);
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a.at(r, j) -= f * a.at(col, j);
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t ri = n; ri-- > 0;) {
        double acc = b[ri];
        for (std::size_t j = ri + 1; j < n; ++j) acc -= a.at(ri, j) * x[j];
        x[ri] = acc / a.at(ri, ri);
    }
    return x;
}

}  // namespace detail

struct AdjustResult {
    PrevalenceVector estimate;
    bool fell_back = false;           // adjustment skipped (tiny denominator / singular system)
    std::vector<double> raw_solution; // pre-clipping solution (multi-category path)
};

// Inverts the classifier bias out of a CC estimate. Binary: the tpr/fpr
// correction formula, clipped to [0,1]. Multi-category: least-squares solve of
// M*p = estimate via normal equations with a condition-number guard, negative
// coordinates clipped and the rest renormalized.
inline AdjustResult acc_adjust(const PrevalenceVector& cc_est, const ConditionalRates& rates) {
    const std::size_t c = cc_est.size();
    if (rates.num_categories() != c) throw std::invalid_argument("acc_adjust: rate matrix size mismatch");
    check_prevalence_vector(cc_est, "acc_adjust");

    if (c == 2) {
        const double tpr = rates.tpr(), fpr = rates.fpr();
        if (std::abs(tpr - fpr) < kDenominatorTol)
            return {cc_est, true, {}};
        double p = (cc_est[1] - fpr) / (tpr - fpr);
        AdjustResult out;
        out.raw_solution = {1.0 - p, p};
        p = std::clamp(p, 0.0, 1.0);
        out.estimate = {1.0 - p, p};
        return out;
    }

    // Normal equations A p = rhs with A = M^T M.
    Matrix a(c, c, 0.0);
    std::vector<double> rhs(c, 0.0);
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < c; ++k) acc += rates.m.at(k, i) * rates.m.at(k, j);
            a.at(i, j) = acc;
        }
        double acc = 0.0;
        for (std::size_t k = 0; k < c; ++k) acc += rates.m.at(k, i) * cc_est[k];
        rhs[i] = acc;
    }
    const auto eig = detail::symmetric_eigenvalues(a);
    double lo = eig[0], hi = eig[0];
    for (double e : eig) {
        lo = std::min(lo, e);
        hi = std::max(hi, e);
    }
    if (!(lo > 0.0) || hi / lo > kConditionLimit)
        return {cc_est, true, {}};
    const auto solved = detail::solve_linear(a, rhs);
    if (!solved) return {cc_est, true, {}};

    AdjustResult out;
    out.raw_solution = *solved;
    std::vector<double> clipped(*solved);
    double sum = 0.0;
    for (double& v : clipped) {
        v = std::max(v, 0.0);
        sum += v;
    }
    if (sum <= 0.0) return {cc_est, true, std::move(out.raw_solution)};
    for (double& v : clipped) v /= sum;
    out.estimate = std::move(clipped);
    return out;
}

// PACC stands to PCC as ACC stands to CC: same solve with soft rates.
inline AdjustResult pacc_adjust(const PrevalenceVector& pcc_est, const ConditionalRates& soft_rates) {
    return acc_adjust(pcc_est, soft_rates);
}

// ---------------------------------------------------------------------------
// SLD / expectation-maximization quantifier
// ---------------------------------------------------------------------------

struct SldResult {
    PrevalenceVector prevalence;
    Matrix corrected_posteriors;
    int iterations = 0;
    bool converged = false;
};

// Mutually-recursive posterior/prior updates until the prior moves by less
// than `epsilon` (mean absolute difference). Categories with zero training
// prior keep ratio 0 and can never gain mass. Each E-step rescales the
// original posteriors by q/train_prev and renormalizes per row.
inline SldResult sld_quantify(const PrevalenceVector& train_prev, const Matrix& posteriors,
                              double epsilon = 1e-4, int max_iter = 1000,
                              std::vector<PrevalenceVector>* trace = nullptr) {
    check_prevalence_vector(train_prev, "sld_quantify");
    const std::size_t c = train_prev.size();
    if (posteriors.cols != c) throw std::invalid_argument("sld_quantify: posterior width mismatch");
    if (posteriors.rows == 0) throw std::invalid_argument("sld_quantify: no posteriors");

    SldResult out;
    out.corrected_posteriors = posteriors;
    PrevalenceVector q = train_prev;
    std::vector<double> ratio(c);
    for (int it = 1; it <= max_iter; ++it) {
        for (std::size_t k = 0; k < c; ++k)
            ratio[k] = train_prev[k] > 0.0 ? q[k] / train_prev[k] : 0.0;
        PrevalenceVector next(c, 0.0);
        for (std::size_t i = 0; i < posteriors.rows; ++i) {
            const auto src = posteriors.row(i);
            auto dst = out.corrected_posteriors.row(i);
            double sum = 0.0;
            for (std::size_t k = 0; k < c; ++k) {
                dst[k] = ratio[k] * src[k];
                sum += dst[k];
            }
            if (sum > 0.0) {
                for (std::size_t k = 0; k < c; ++k) dst[k] /= sum;
            } else {
                std::copy(src.begin(), src.end(), dst.begin());
            }
            for (std::size_t k = 0; k < c; ++k) next[k] += dst[k];
        }
        for (double& v : next) v /= static_cast<double>(posteriors.rows);
        double delta = 0.0;
        for (std::size_t k = 0; k < c; ++k) delta += std::abs(next[k] - q[k]);
        delta /= static_cast<double>(c);
        q = std::move(next);
        if (trace) trace->push_back(q);
        out.iterations = it;
        if (delta < epsilon) {
            out.converged = true;
            break;
        }
    }
    out.prevalence = std::move(q);
    return out;
}

// ---------------------------------------------------------------------------
// HDy: Hellinger-distance mixture estimation (binary)
// ---------------------------------------------------------------------------

inline double hellinger_distance(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("hellinger_distance: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = std::sqrt(p[i]) - std::sqrt(q[i]);
        acc += d * d;
    }
    return std::sqrt(acc);
}

// Normalized histogram of scores in [0,1] over `bins` equal bins; values at
// 1.0 land in the last bin.
inline std::vector<double> histogram01(std::span<const double> scores, std::size_t bins) {
    if (bins == 0) throw std::invalid_argument("histogram01: bins must be positive");
    if (scores.empty()) throw std::invalid_argument("histogram01: empty scores");
    std::vector<double> h(bins, 0.0);
    for (double v : scores) {
        auto idx = static_cast<std::size_t>(std::clamp(v, 0.0, 1.0) * static_cast<double>(bins));
        if (idx >= bins) idx = bins - 1;
        h[idx] += 1.0;
    }
    for (double& v : h) v /= static_cast<double>(scores.size());
    return h;
}

struct HdyResult {
    double alpha = 0.0;                  // estimated positive prevalence
    std::vector<double> alpha_per_bins;  // winning alpha for each bin count in {10,...,110}
};

// For each bin count in {10,...,110} find the mixture weight alpha on the
// {0, 0.01, ..., 1} grid minimizing HD(alpha*H_pos + (1-alpha)*H_neg, H_test);
// the estimate is the median of the eleven winners. Ties pick the lowest alpha.
inline HdyResult hdy_quantify(std::span<const double> val_pos_scores, std::span<const double> val_neg_scores,
                              std::span<const double> test_scores) {
    if (val_pos_scores.empty() || val_neg_scores.empty())
        throw std::invalid_argument("hdy_quantify: both validation sides must be nonempty");
    if (test_scores.empty()) throw std::invalid_argument("hdy_quantify: empty test scores");

    HdyResult out;
    std::vector<double> mix;
    for (std::size_t bins = 10; bins <= 110; bins += 10) {
        const auto hp = histogram01(val_pos_scores, bins);
        const auto hn = histogram01(val_neg_scores, bins);
        const auto ht = histogram01(test_scores, bins);
        mix.assign(bins, 0.0);
        double best_alpha = 0.0;
        double best_hd = std::numeric_limits<double>::infinity();
        for (int step = 0; step <= 100; ++step) {
            const double alpha = static_cast<double>(step) / 100.0;
            for (std::size_t b = 0; b < bins; ++b) mix[b] = alpha * hp[b] + (1.0 - alpha) * hn[b];
            const double hd = hellinger_distance(mix, ht);
            if (hd < best_hd) {
                best_hd = hd;
                best_alpha = alpha;
            }
        }
        out.alpha_per_bins.push_back(best_alpha);
    }
    out.alpha = median_of(out.alpha_per_bins);
    return out;
}

// ---------------------------------------------------------------------------
// Threshold-selection variants of the binary adjustment
// ---------------------------------------------------------------------------

enum class ThresholdPolicy { t50, x, max, ms, ms2 };

inline const char* threshold_policy_name(ThresholdPolicy p) {
    switch (p) {
        case ThresholdPolicy::t50: return "t50";
        case ThresholdPolicy::x: return "x";
        case ThresholdPolicy::max: return "max";
        case ThresholdPolicy::ms: return "ms";
        case ThresholdPolicy::ms2: return "ms2";
    }
    return "?";
}

struct ThresholdCandidate {
    double threshold = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
};

// Candidate thresholds are the sorted unique validation scores; an item is
// predicted positive when its score >= threshold.
inline std::vector<ThresholdCandidate> threshold_sweep(std::span<const double> val_scores,
                                                       std::span<const std::size_t> val_labels) {
    if (val_scores.size() != val_labels.size() || val_scores.empty())
        throw std::invalid_argument("threshold_sweep: bad input lengths");
    std::size_t npos = 0, nneg = 0;
    for (std::size_t l : val_labels) {
        if (l > 1) throw std::invalid_argument("threshold_sweep: labels must be 0/1");
        (l == 1 ? npos : nneg) += 1;
    }
    if (npos == 0 || nneg == 0)
        throw std::runtime_error("threshold_sweep: validation needs both categories");
    std::vector<double> thresholds(val_scores.begin(), val_scores.end());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    std::vector<ThresholdCandidate> out;
    out.reserve(thresholds.size());
    for (double t : thresholds) {
        std::size_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < val_scores.size(); ++i) {
            if (val_scores[i] >= t) (val_labels[i] == 1 ? tp : fp) += 1;
        }
        out.push_back({t, static_cast<double>(tp) / static_cast<double>(npos),
                       static_cast<double>(fp) / static_cast<double>(nneg)});
    }
    return out;
}

struct ThresholdResult {
    PrevalenceVector estimate;  // [negative, positive]
    double threshold = std::numeric_limits<double>::quiet_NaN();  // selected t (t50/x/max only)
    bool fell_back = false;
};

namespace detail {

inline double cc_at_threshold(std::span<const double> test_scores, double t) {
    std::size_t pos = 0;
    for (double s : test_scores) pos += (s >= t) ? 1 : 0;
    return static_cast<double>(pos) / static_cast<double>(test_scores.size());
}

inline double adjusted_at(const ThresholdCandidate& cand, double cc, bool* fell_back) {
    if (std::abs(cand.tpr - cand.fpr) < kDenominatorTol) {
        if (fell_back) *fell_back = true;
        return std::clamp(cc, 0.0, 1.0);
    }
    return std::clamp((cc - cand.fpr) / (cand.tpr - cand.fpr), 0.0, 1.0);
}

}  // namespace detail

// Binary only. T50/X/MAX pick one candidate threshold by their heuristic
// (ties -> lowest threshold) and return the adjusted estimate there; MS takes
// the median of the adjusted estimates over all candidates with a usable
// denominator; MS2 restricts to tpr-fpr > 0.25 and degrades to MS when no
// candidate qualifies.
inline ThresholdResult threshold_quantify(ThresholdPolicy policy, std::span<const double> val_scores,
                                          std::span<const std::size_t> val_labels,
                                          std::span<const double> test_scores) {
    if (test_scores.empty()) throw std::invalid_argument("threshold_quantify: empty test scores");
    const auto candidates = threshold_sweep(val_scores, val_labels);
    if (candidates.empty()) throw std::runtime_error("threshold_quantify: empty candidate set");

    ThresholdResult out;
    const auto finish = [&](double p) {
        out.estimate = {1.0 - p, p};
        return out;
    };

    if (policy == ThresholdPolicy::ms || policy == ThresholdPolicy::ms2) {
        std::vector<double> estimates;
        for (const auto& cand : candidates) {
            if (std::abs(cand.tpr - cand.fpr) < kDenominatorTol) continue;
            if (policy == ThresholdPolicy::ms2 && !(cand.tpr - cand.fpr > 0.25)) continue;
            estimates.push_back(detail::adjusted_at(cand, detail::cc_at_threshold(test_scores, cand.threshold),
                                                    nullptr));
        }
        if (estimates.empty() && policy == ThresholdPolicy::ms2) {
            for (const auto& cand : candidates) {
                if (std::abs(cand.tpr - cand.fpr) < kDenominatorTol) continue;
                estimates.push_back(detail::adjusted_at(cand, detail::cc_at_threshold(test_scores, cand.threshold),
                                                        nullptr));
            }
        }
        if (estimates.empty()) {
            out.fell_back = true;
            return finish(detail::cc_at_threshold(test_scores, 0.5));
        }
        return finish(median_of(std::move(estimates)));
    }

    std::size_t best = 0;
    auto score = [&](const ThresholdCandidate& cand) {
        switch (policy) {
            case ThresholdPolicy::t50: return std::abs(cand.tpr - 0.5);
            case ThresholdPolicy::x: return std::abs(1.0 - (cand.tpr + cand.fpr));
            case ThresholdPolicy::max: return -(cand.tpr - cand.fpr);
            default: return 0.0;
        }
    };
    for (std::size_t i = 1; i < candidates.size(); ++i)
        if (score(candidates[i]) < score(candidates[best])) best = i;  // strict: ties keep lowest t
    out.threshold = candidates[best].threshold;
    const double cc = detail::cc_at_threshold(test_scores, candidates[best].threshold);
    return finish(detail::adjusted_at(candidates[best], cc, &out.fell_back));
}

// ---------------------------------------------------------------------------
// Quantifier classes
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::size_t> argmax_rows(const Matrix& m) {
    std::vector<std::size_t> out(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const auto row = m.row(i);
        std::size_t best = 0;
        for (std::size_t k = 1; k < row.size(); ++k)
            if (row[k] > row[best]) best = k;
        out[i] = best;
    }
    return out;
}

inline Matrix select_rows(const Matrix& m, std::span<const std::size_t> indices) {
    Matrix out(indices.size(), m.cols);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto src = m.row(indices[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

inline std::vector<double> select_column(const Matrix& m, std::span<const std::size_t> indices, std::size_t col) {
    std::vector<double> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(m.at(i, col));
    return out;
}

// val_split parameter value: < 1 means a fraction, an integral value >= 2
// means k folds.
inline ValSplit val_split_from_param(const ParamValue& v) {
    const double x = param_as_double(v, "val_split");
    if (x > 0.0 && x < 1.0) return ValSplit::fraction(x);
    if (x >= 2.0 && x == std::floor(x)) return ValSplit::folds(static_cast<std::size_t>(x));
    throw std::invalid_argument("val_split must be a fraction in (0,1) or an integer >= 2");
}

inline double val_split_to_param(const ValSplit& v) {
    switch (v.mode()) {
        case ValSplit::Mode::folds: return static_cast<double>(v.k());
        case ValSplit::Mode::fraction: return v.fraction_value();
        case ValSplit::Mode::heldout: return 0.0;  // explicit collection; not expressible as a scalar
    }
    return 0.0;
}

}  // namespace detail

// CC: fraction of items the classifier assigns to each category.
class CcQuantifier : public LearnerBackedQuantifier {
public:
    explicit CcQuantifier(std::unique_ptr<Learner> learner = std::make_unique<LogisticRegression>())
        : LearnerBackedQuantifier(std::move(learner)) {}

    void fit(const LabelledCollection& training) override {
        model_ = learner_->fit(training);
        c_ = training.num_categories();
        fitted_ = true;
    }

    ClassifierOutputs precompute(const FeatureMatrix& pool) const override {
        require_fitted();
        ClassifierOutputs out;
        out.labels = model_->predict(pool);
        out.count = pool.rows();
        return out;
    }

    PrevalenceVector aggregate(const ClassifierOutputs& outputs,
                               std::span<const std::size_t> indices) const override {
        require_fitted();
        std::vector<std::size_t> picked;
        picked.reserve(indices.size());
        for (std::size_t i : indices) picked.push_back((*outputs.labels)[i]);
        return cc_from_labels(picked, c_);
    }

    std::unique_ptr<Quantifier> clone() const override {
        return std::make_unique<CcQuantifier>(learner_->clone());
    }
    std::string name() const override { return "cc"; }

protected:
    std::unique_ptr<ClassifierModel> model_;
    std::size_t c_ = 0;
};

// ACC: CC corrected by hard misclassification rates estimated out-of-sample.
class AccQuantifier : public LearnerBackedQuantifier {
public:
    explicit AccQuantifier(std::unique_ptr<Learner> learner = std::make_unique<LogisticRegression>(),
                           ValSplit val_split = {})
        : LearnerBackedQuantifier(std::move(learner)), val_split_(val_split) {}

    void fit(const LabelledCollection& training) override {
        auto cv = cross_val_posteriors(training, *learner_, val_split_, kValSplitSeed);
        rates_ = ConditionalRates::hard(detail::argmax_rows(cv.posteriors), cv.true_ids,
                                        training.num_categories());
        model_ = std::move(cv.model);
        c_ = training.num_categories();
        fitted_ = true;
    }

    ClassifierOutputs precompute(const FeatureMatrix& pool) const override {
        require_fitted();
        ClassifierOutputs out;
        out.labels = model_->predict(pool);
        out.count = pool.rows();
        return out;
    }

    PrevalenceVector aggregate(const ClassifierOutputs& outputs,
                               std::span<const std::size_t> indices) const override {
        require_fitted();
        std::vector<std::size_t> picked;
        picked.reserve(indices.size());
        for (std::size_t i : indices) picked.push_back((*outputs.labels)[i]);
        return acc_adjust(cc_from_labels(picked, c_), rates_).estimate;
    }

    const ConditionalRates& rates() const { return rates_; }

    std::unique_ptr<Quantifier> clone() const override {
        return std::make_unique<AccQuantifier>(learner_->clone(), val_split_);
    }
    std::string name() const override { return "acc"; }

protected:
    ParamMap own_params() const override { return {{"val_split", detail::val_split_to_param(val_split_)}}; }
    void set_own_param(const std::string& key, const ParamValue& v) override {
        if (key == "val_split") val_split_ = detail::val_split_from_param(v);
        else LearnerBackedQuantifier::set_own_param(key, v);
    }

    ValSplit val_split_;
    ConditionalRates rates_;
    std::unique_ptr<ClassifierModel> model_;
    std::size_t c_ = 0;
};

// PCC: mean posterior per category.
class PccQuantifier : public LearnerBackedQuantifier {
public:
    explicit PccQuantifier(std::unique_ptr<Learner> learner = std::make_unique<LogisticRegression>())
        : LearnerBackedQuantifier(std::move(learner)) {}

    void fit(const LabelledCollection& training) override {
        model_ = learner_->fit(training);
        fitted_ = true;
    }

    ClassifierOutputs precompute(const FeatureMatrix& pool) const override {
        require_fitted();
        ClassifierOutputs out;
        out.posteriors = model_->posteriors(pool);
        out.count = pool.rows();
        return out;
    }

    PrevalenceVector aggregate(const ClassifierOutputs& outputs,
                               std::span<const std::size_t> indices) const override {
        require_fitted();
        return pcc_from_posteriors(*outputs.posteriors, indices);
    }

    std::unique_ptr<Quantifier> clone() const override {
        return std::make_unique<PccQuantifier>(learner_->clone());
    }
    std::string name() const override { return "pcc"; }

protected:
    std::unique_ptr<ClassifierModel> model_;
};

// PACC: PCC corrected by soft rates (mean posteriors per true category).
class PaccQuantifier : public LearnerBackedQuantifier {
public:
    explicit PaccQuantifier(std::unique_ptr<Learner> learner = std::make_unique<LogisticRegression>(),
                            ValSplit val_split = {})
        : LearnerBackedQuantifier(std::move(learner)), val_split_(val_split) {}

    void fit(const LabelledCollection& training) override {
        auto cv = cross_val_posteriors(training, *learner_, val_split_, kValSplitSeed);
        rates_ = ConditionalRates::soft(cv.posteriors, cv.true_ids);
        model_ = std::move(cv.model);
        fitted_ = true;
    }

    ClassifierOutputs precompute(const FeatureMatrix& pool) const override {
        require_fitted();
        ClassifierOutputs out;
        out.posteriors = model_->posteriors(pool);
        out.count = pool.rows();
        return out;
    }

    PrevalenceVector aggregate(const ClassifierOutputs& outputs,
                               std::span<const std::size_t> indices) const override {
        require_fitted();
        return pacc_adjust(pcc_from_posteriors(*outputs.posteriors, indices), rates_).estimate;
    }

    const ConditionalRates& rates() const { return rates_; }

    std::unique_ptr<Quantifier> clone() const override {
        return std::make_unique<PaccQuantifier>(learner_->clone(), val_split_);
    }
    std::string name() const override { return "pacc"; }

protected:
    ParamMap own_params() const override { return {{"val_split", detail::val_split_to_param(val_split_)}}; }
    void set_own_param(const std::string& key, const ParamValue& v) override {
        if (key == "val_split") val_split_ = detail::val_split_from_param(v);
        else LearnerBackedQuantifier::set_own_param(key, v);
    }

    ValSplit val_split_;
    ConditionalRates rates_;
    std::unique_ptr<ClassifierModel> model_;
};

// SLD/EMQ: EM fixed point над the classifier posteriors, started from the
// training prevalence.
class SldQuantifier : public LearnerBackedQuantifier {
public:
    explicit SldQuantifier(std::unique_ptr<Learner> learner = std::make_unique<LogisticRegression>(),
                           double epsilon = 1e-4, int max_iter = 1000)
        : LearnerBackedQuantifier(std::move(learner)), epsilon_(epsilon), max_iter_(max_iter) {}

    void fit(const LabelledCollection& training) override {
        model_ = learner_->fit(training);
        train_prev_ = training.prevalence();
        fitted_ = true;
    }

    ClassifierOutputs precompute(const FeatureMatrix& pool) const override {
        require_fitted();
        ClassifierOutputs out;
        out.posteriors = model_->posteriors(pool);
        out.count = pool.rows();
        return out;
    }

    PrevalenceVector aggregate(const ClassifierOutputs& outputs,
                               std::span<const std::size_t> indices) const override {
        require_fitted();
        const Matrix sub = detail::select_rows(*outputs.posteriors, indices);
        return sld_quantify(train_prev_, sub, epsilon_, max_iter_).prevalence;
    }

    std::unique_ptr<Quantifier> clone() const override {
        return std::make_unique<SldQuantifier>(learner_->clone(), epsilon_, max_iter_);
    }
    std::string name() const override { return "sld"; }

protected:
    ParamMap own_params() const override {
        return {{"epsilon", epsilon_}, {"max_iter", static_cast<double>(max_iter_)}};
    }
    void set_own_param(const std::string& key, const ParamValue& v) override {
        if (key == "epsilon") epsilon_ = param_as_double(v, "epsilon");
        else if (key == "max_iter") max_iter_ = static_cast<int>(param_as_double(v, "max_iter"));
        else LearnerBackedQuantifier::set_own_param(key, v);
    }

    double epsilon_;
    int max_iter_;
    PrevalenceVector train_prev_;
    std::unique_ptr<ClassifierModel> model_;
};

// HDy: binary mixture-of-histograms estimation over validation posteriors.
class HdyQuantifier : public LearnerBackedQuantifier {
public:
    explicit HdyQuantifier(std::unique_ptr<Learner> learner = std::make_unique<LogisticRegression>(),
                           ValSplit val_split = {})
        : LearnerBackedQuantifier(std::move(learner)), val_split_(val_split) {}

    void fit(const LabelledCollection& training) override {
        if (training.num_categories() != 2)
            throw std::runtime_error("hdy: binary tasks only (wrap in ova for multi-category)");
        auto cv = cross_val_posteriors(training, *learner_, val_split_, kValSplitSeed);
        val_pos_.clear();
        val_neg_.clear();
        for (std::size_t i = 0; i < cv.posteriors.rows; ++i)
            (cv.true_ids[i] == 1 ? val_pos_ : val_neg_).push_back(cv.posteriors.at(i, 1));
        if (val_pos_.empty() || val_neg_.empty())
            throw std::runtime_error("hdy: validation split lost a category");
        model_ = std::move(cv.model);
        fitted_ = true;
    }

    ClassifierOutputs precompute(const FeatureMatrix& pool) const override {
        require_fitted();
        ClassifierOutputs out;
        out.posteriors = model_->posteriors(pool);
        out.count = pool.rows();
        return out;
    }

    PrevalenceVector aggregate(const ClassifierOutputs& outputs,
                               std::span<const std::size_t> indices) const override {
        require_fitted();
        const auto scores = detail::select_column(*outputs.posteriors, indices, 1);
        const double alpha = hdy_quantify(val_pos_, val_neg_, scores).alpha;
        return {1.0 - alpha, alpha};
    }

    std::unique_ptr<Quantifier> clone() const override {
        return std::make_unique<HdyQuantifier>(learner_->clone(), val_split_);
    }
    std::string name() const override { return "hdy"; }

protected:
    ParamMap own_params() const override { return {{"val_split", detail::val_split_to_param(val_split_)}}; }
    void set_own_param(const std::string& key, const ParamValue& v) override {
        if (key == "val_split") val_split_ = detail::val_split_from_param(v);
        else LearnerBackedQuantifier::set_own_param(key, v);
    }

    ValSplit val_split_;
    std::vector<double> val_pos_, val_neg_;
    std::unique_ptr<ClassifierModel> model_;
};

// Forman's threshold-selection family (binary).
class ThresholdQuantifier : public LearnerBackedQuantifier {
public:
    explicit ThresholdQuantifier(ThresholdPolicy policy,
                                 std::unique_ptr<Learner> learner = std::make_unique<LogisticRegression>(),
                                 ValSplit val_split = {})
        : LearnerBackedQuantifier(std::move(learner)), policy_(policy), val_split_(val_split) {}

    void fit(const LabelledCollection& training) override {
        if (training.num_categories() != 2)
            throw std::runtime_error(std::string(threshold_policy_name(policy_)) +
                                     ": binary tasks only (wrap in ova for multi-category)");
        auto cv = cross_val_posteriors(training, *learner_, val_split_, kValSplitSeed);
        val_scores_.clear();
        for (std::size_t i = 0; i < cv.posteriors.rows; ++i) val_scores_.push_back(cv.posteriors.at(i, 1));
        val_labels_ = cv.true_ids;
        model_ = std::move(cv.model);
        fitted_ = true;
    }

    ClassifierOutputs precompute(const FeatureMatrix& pool) const override {
        require_fitted();
        ClassifierOutputs out;
        out.posteriors = model_->posteriors(pool);
        out.count = pool.rows();
        return out;
    }

    PrevalenceVector aggregate(const ClassifierOutputs& outputs,
                               std::span<const std::size_t> indices) const override {
        require_fitted();
        const auto scores = detail::select_column(*outputs.posteriors, indices, 1);
        return threshold_quantify(policy_, val_scores_, val_labels_, scores).estimate;
    }

    std::unique_ptr<Quantifier> clone() const override {
        return std::make_unique<ThresholdQuantifier>(policy_, learner_->clone(), val_split_);
    }
    std::string name() const override { return threshold_policy_name(policy_); }

protected:
    ParamMap own_params() const override { return {{"val_split", detail::val_split_to_param(val_split_)}}; }
    void set_own_param(const std::string& key, const ParamValue& v) override {
        if (key == "val_split") val_split_ = detail::val_split_from_param(v);
        else LearnerBackedQuantifier::set_own_param(key, v);
    }

    ThresholdPolicy policy_;
    ValSplit val_split_;
    std::vector<double> val_scores_;
    std::vector<std::size_t> val_labels_;
    std::unique_ptr<ClassifierModel> model_;
};

}  // namespace quantkit

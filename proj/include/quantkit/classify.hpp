#pragma once

// Built-in probabilistic linear learner. Multinomial logistic regression,
// L2-regularized cross-entropy minimized by deterministic full-batch gradient
// descent with backtracking line search: identical (data, config) always
// yields identical weights.

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "quantkit/core.hpp"
#include "quantkit/data.hpp"

namespace quantkit {

using ParamValue = std::variant<double, std::string>;
using ParamMap = std::map<std::string, ParamValue>;

inline double param_as_double(const ParamValue& v, const char* name) {
    if (const double* d = std::get_if<double>(&v)) return *d;
    throw std::invalid_argument(std::string("parameter '") + name + "' must be numeric");
}

inline std::string param_as_string(const ParamValue& v) {
    if (const std::string* s = std::get_if<std::string>(&v)) return *s;
    return format_fixed(std::get<double>(v), 6);
}

enum class ClassWeight { none, balanced };

struct LearnerConfig {
    double C = 1.0;                 // inverse regularization strength
    ClassWeight class_weight = ClassWeight::none;
    int max_iterations = 500;
    double tolerance = 1e-6;        // stop when the gradient sup-norm drops below

    void validate() const {
        if (!(C > 0.0)) throw std::invalid_argument("LearnerConfig: C must be positive");
        if (max_iterations < 1) throw std::invalid_argument("LearnerConfig: max_iterations must be >= 1");
        if (!(tolerance > 0.0)) throw std::invalid_argument("LearnerConfig: tolerance must be positive");
    }
};

// A trained classifier: posterior rows are valid distributions, predictions
// argmax with lowest-index tie break.
class ClassifierModel {
public:
    virtual ~ClassifierModel() = default;
    virtual std::size_t num_categories() const = 0;
    virtual Matrix posteriors(const FeatureMatrix& x) const = 0;

    virtual std::vector<std::size_t> predict(const FeatureMatrix& x) const {
        const Matrix post = posteriors(x);
        std::vector<std::size_t> out(post.rows);
        for (std::size_t i = 0; i < post.rows; ++i) {
            const auto row = post.row(i);
            std::size_t best = 0;
            for (std::size_t k = 1; k < row.size(); ++k)
                if (row[k] > row[best]) best = k;
            out[i] = best;
        }
        return out;
    }
};

// Trainer interface; quantifiers hold a Learner and call fit() as needed.
class Learner {
public:
    virtual ~Learner() = default;
    virtual std::unique_ptr<ClassifierModel> fit(const LabelledCollection& coll) const = 0;
    virtual std::unique_ptr<Learner> clone() const = 0;
    virtual ParamMap params() const { return {}; }
    virtual void set_param(const std::string& name, const ParamValue&) {
        throw std::invalid_argument("learner has no parameter '" + name + "'");
    }
};

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

class LinearModel final : public ClassifierModel {
public:
    LinearModel(Matrix weights, std::vector<double> bias, std::size_t dim, bool converged, int iterations)
        : weights_(std::move(weights)), bias_(std::move(bias)), dim_(dim),
          converged_(converged), iterations_(iterations) {}

    std::size_t num_categories() const override { return bias_.size(); }
    std::size_t dim() const { return dim_; }
    bool converged() const { return converged_; }
    int iterations() const { return iterations_; }
    const Matrix& weights() const { return weights_; }
    const std::vector<double>& bias() const { return bias_; }

    Matrix posteriors(const FeatureMatrix& x) const override {
        if (x.dim() != dim_)
            throw std::invalid_argument("LinearModel: feature dimension mismatch");
        const std::size_t c = bias_.size();
        Matrix post(x.rows(), c);
        std::vector<double> scores(c);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            for (std::size_t k = 0; k < c; ++k) scores[k] = x.dot(i, weights_.row(k)) + bias_[k];
            softmax_row(scores, post.row(i));
        }
        return post;
    }

    // Row-max subtraction keeps the exponentials in range.
    static void softmax_row(std::span<const double> scores, std::span<double> out) {
        double mx = scores[0];
        for (double s : scores) mx = std::max(mx, s);
        double sum = 0.0;
        for (std::size_t k = 0; k < scores.size(); ++k) {
            out[k] = std::exp(scores[k] - mx);
            sum += out[k];
        }
        for (std::size_t k = 0; k < scores.size(); ++k) out[k] /= sum;
    }

private:
    Matrix weights_;  // c x d
    std::vector<double> bias_;
    std::size_t dim_;
    bool converged_;
    int iterations_;
};

namespace detail {

// Loss and gradient of the (1/n)-scaled weighted cross-entropy plus
// (1/(2Cn))*||W||^2; the bias stays unregularized.
struct LrObjective {
    const LabelledCollection& coll;
    const LearnerConfig& cfg;
    std::vector<double> item_weights;
    std::size_t c, d, n;

    LrObjective(const LabelledCollection& coll_, const LearnerConfig& cfg_)
        : coll(coll_), cfg(cfg_), c(coll_.num_categories()), d(coll_.features().dim()), n(coll_.size()) {
        item_weights.assign(n, 1.0);
        if (cfg.class_weight == ClassWeight::balanced) {
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t cnt = coll.count_of(coll.label_ids()[i]);
                item_weights[i] = static_cast<double>(n) / (static_cast<double>(c) * static_cast<double>(cnt));
            }
        }
    }

    double eval(const Matrix& w, const std::vector<double>& b, Matrix* grad_w, std::vector<double>* grad_b) const {
        const FeatureMatrix& x = coll.features();
        double loss = 0.0;
        if (grad_w) {
            grad_w->values.assign(c * d, 0.0);
            grad_w->rows = c;
            grad_w->cols = d;
            grad_b->assign(c, 0.0);
        }
        std::vector<double> scores(c), probs(c);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < c; ++k) scores[k] = x.dot(i, w.row(k)) + b[k];
            double mx = scores[0];
            for (double s : scores) mx = std::max(mx, s);
            double sum = 0.0;
            for (std::size_t k = 0; k < c; ++k) {
                probs[k] = std::exp(scores[k] - mx);
                sum += probs[k];
            }
            const std::size_t y = coll.label_ids()[i];
            const double wi = item_weights[i];
            loss += wi * (std::log(sum) - (scores[y] - mx));
            if (grad_w) {
                for (std::size_t k = 0; k < c; ++k) {
                    const double coef = wi * (probs[k] / sum - (k == y ? 1.0 : 0.0));
                    if (coef == 0.0) continue;
                    auto gw = grad_w->row(k);
                    x.for_features(i, [&](std::size_t j, double v) { gw[j] += coef * v; });
                    (*grad_b)[k] += coef;
                }
            }
        }
        double reg = 0.0;
        for (double v : w.values) reg += v * v;
        loss += reg / (2.0 * cfg.C);
        const double inv_n = 1.0 / static_cast<double>(n);
        loss *= inv_n;
        if (grad_w) {
            for (std::size_t idx = 0; idx < grad_w->values.size(); ++idx)
                grad_w->values[idx] = (grad_w->values[idx] + w.values[idx] / cfg.C) * inv_n;
            for (double& g : *grad_b) g *= inv_n;
        }
        return loss;
    }
};

}  // namespace detail

class LogisticRegression final : public Learner {
public:
    LogisticRegression() = default;
    explicit LogisticRegression(LearnerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

    const LearnerConfig& config() const { return cfg_; }

    std::unique_ptr<ClassifierModel> fit(const LabelledCollection& coll) const override {
        cfg_.validate();
        std::size_t present = 0;
        for (std::size_t cat = 0; cat < coll.num_categories(); ++cat)
            if (coll.count_of(cat) > 0) ++present;
        if (present < 2) throw std::runtime_error("LogisticRegression: degenerate training set");

        const std::size_t c = coll.num_categories();
        const std::size_t d = coll.features().dim();
        detail::LrObjective obj(coll, cfg_);

        Matrix w(c, d, 0.0);
        std::vector<double> b(c, 0.0);
        Matrix grad_w;
        std::vector<double> grad_b;
        double loss = obj.eval(w, b, &grad_w, &grad_b);

        bool converged = false;
        int iter = 0;
        double step = 1.0;
        Matrix w_try(c, d);
        std::vector<double> b_try(c);
        for (; iter < cfg_.max_iterations; ++iter) {
            double gnorm = 0.0, gsq = 0.0;
            for (double g : grad_w.values) { gnorm = std::max(gnorm, std::abs(g)); gsq += g * g; }
            for (double g : grad_b) { gnorm = std::max(gnorm, std::abs(g)); gsq += g * g; }
            if (gnorm < cfg_.tolerance) {
                converged = true;
                break;
            }
            // Armijo backtracking along the negative gradient.
            constexpr double kArmijo = 1e-4;
            bool accepted = false;
            for (int halvings = 0; halvings < 60; ++halvings) {
                for (std::size_t idx = 0; idx < w.values.size(); ++idx)
                    w_try.values[idx] = w.values[idx] - step * grad_w.values[idx];
                for (std::size_t k = 0; k < c; ++k) b_try[k] = b[k] - step * grad_b[k];
                const double trial = obj.eval(w_try, b_try, nullptr, nullptr);
                if (trial <= loss - kArmijo * step * gsq) {
                    std::swap(w.values, w_try.values);
                    std::swap(b, b_try);
                    loss = trial;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;  // no descent direction progress left at double precision
            loss = obj.eval(w, b, &grad_w, &grad_b);
            step = std::min(step * 2.0, 1e6);
        }
        return std::make_unique<LinearModel>(std::move(w), std::move(b), d, converged, iter);
    }

    std::unique_ptr<Learner> clone() const override { return std::make_unique<LogisticRegression>(*this); }

    ParamMap params() const override {
        return {{"C", cfg_.C},
                {"class_weight", std::string(cfg_.class_weight == ClassWeight::balanced ? "balanced" : "none")},
                {"max_iterations", static_cast<double>(cfg_.max_iterations)},
                {"tolerance", cfg_.tolerance}};
    }

    void set_param(const std::string& name, const ParamValue& value) override {
        if (name == "C") {
            cfg_.C = param_as_double(value, "C");
        } else if (name == "class_weight") {
            const std::string s = param_as_string(value);
            if (s == "balanced") cfg_.class_weight = ClassWeight::balanced;
            else if (s == "none" || s.empty()) cfg_.class_weight = ClassWeight::none;
            else throw std::invalid_argument("class_weight must be 'balanced' or 'none'");
        } else if (name == "max_iterations") {
            cfg_.max_iterations = static_cast<int>(param_as_double(value, "max_iterations"));
        } else if (name == "tolerance") {
            cfg_.tolerance = param_as_double(value, "tolerance");
        } else {
            throw std::invalid_argument("LogisticRegression has no parameter '" + name + "'");
        }
        cfg_.validate();
    }

private:
    LearnerConfig cfg_;
};

// ---------------------------------------------------------------------------
// Out-of-sample posterior generation (`val_split` semantics).
// ---------------------------------------------------------------------------

// How to carve the validation data used for estimating classifier behaviour.
class ValSplit {
public:
    enum class Mode { folds, fraction, heldout };

    static ValSplit folds(std::size_t k) {
        if (k < 2) throw std::invalid_argument("ValSplit: k must be >= 2");
        ValSplit v;
        v.mode_ = Mode::folds;
        v.k_ = k;
        return v;
    }
    static ValSplit fraction(double f) {
        if (!(f > 0.0 && f < 1.0)) throw std::invalid_argument("ValSplit: fraction must lie in (0,1)");
        ValSplit v;
        v.mode_ = Mode::fraction;
        v.fraction_ = f;
        return v;
    }
    static ValSplit heldout(LabelledCollection coll) {
        ValSplit v;
        v.mode_ = Mode::heldout;
        v.heldout_ = std::make_shared<LabelledCollection>(std::move(coll));
        return v;
    }

    Mode mode() const { return mode_; }
    std::size_t k() const { return k_; }
    double fraction_value() const { return fraction_; }
    const LabelledCollection& heldout_collection() const { return *heldout_; }

    // Default: 5-fold cross-validation.
    ValSplit() = default;

private:
    Mode mode_ = Mode::folds;
    std::size_t k_ = 5;
    double fraction_ = 0.4;
    std::shared_ptr<LabelledCollection> heldout_;
};

struct CrossValResult {
    Matrix posteriors;                    // one row per heldout item
    std::vector<std::size_t> true_ids;    // aligned true category ids
    std::unique_ptr<ClassifierModel> model;  // refit on the full collection (folds/fraction)
};

// k-FCV gives every training item exactly one out-of-fold posterior;
// fraction/heldout modes cover only the heldout items. The returned model is
// refit on all of `coll` for folds/fraction, and trained on `coll` as given
// for the explicit mode.
inline CrossValResult cross_val_posteriors(const LabelledCollection& coll, const Learner& learner,
                                           const ValSplit& split, std::uint64_t seed) {
    CrossValResult out;
    switch (split.mode()) {
        case ValSplit::Mode::folds: {
            const auto folds = kfold_indices(coll, split.k(), seed);
            out.posteriors = Matrix(coll.size(), coll.num_categories());
            out.true_ids = coll.label_ids();
            for (const auto& fold : folds) {
                const auto model = learner.fit(coll.select(fold.train_indices));
                const Matrix post = model->posteriors(coll.features().select(fold.heldout_indices));
                for (std::size_t r = 0; r < fold.heldout_indices.size(); ++r) {
                    const auto src = post.row(r);
                    auto dst = out.posteriors.row(fold.heldout_indices[r]);
                    std::copy(src.begin(), src.end(), dst.begin());
                }
            }
            out.model = learner.fit(coll);
            return out;
        }
        case ValSplit::Mode::fraction: {
            auto [train_idx, held_idx] = split_stratified_indices(coll, split.fraction_value(), seed);
            const auto model = learner.fit(coll.select(train_idx));
            out.posteriors = model->posteriors(coll.features().select(held_idx));
            out.true_ids.reserve(held_idx.size());
            for (std::size_t i : held_idx) out.true_ids.push_back(coll.label_ids()[i]);
            out.model = learner.fit(coll);
            return out;
        }
        case ValSplit::Mode::heldout: {
            const auto& held = split.heldout_collection();
            if (held.categories() != coll.categories())
                throw std::invalid_argument("cross_val_posteriors: heldout categories differ from training");
            out.model = learner.fit(coll);
            out.posteriors = out.model->posteriors(held.features());
            out.true_ids = held.label_ids();
            return out;
        }
    }
    throw std::logic_error("cross_val_posteriors: unreachable");
}

}  // namespace quantkit

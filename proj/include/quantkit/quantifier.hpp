#pragma once

// The quantifier contract: fit / quantify / get_params / set_params, plus the
// aggregative specialization whose estimates are functions of per-item
// classifier outputs. Aggregative quantifiers expose precompute/aggregate so
// protocols can classify a pool once and reuse the outputs for every sample.

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quantkit/classify.hpp"
#include "quantkit/core.hpp"
#include "quantkit/data.hpp"

namespace quantkit {

class Quantifier {
public:
    virtual ~Quantifier() = default;

    virtual void fit(const LabelledCollection& training) = 0;
    virtual PrevalenceVector quantify(const FeatureMatrix& instances) const = 0;
    virtual ParamMap get_params() const = 0;
    virtual void set_params(const ParamMap& params) = 0;
    virtual std::unique_ptr<Quantifier> clone() const = 0;
    virtual std::string name() const = 0;

    bool fitted() const { return fitted_; }

protected:
    void require_fitted() const {
        if (!fitted_) throw std::runtime_error(name() + ": quantify before fit");
    }
    bool fitted_ = false;
};

// One classifier pass over a pool: crisp labels and/or posterior rows,
// whichever the concrete method consumes.
struct ClassifierOutputs {
    std::optional<std::vector<std::size_t>> labels;
    std::optional<Matrix> posteriors;
    std::size_t count = 0;
};

class AggregativeQuantifier : public Quantifier {
public:
    // Classifies the whole pool once.
    virtual ClassifierOutputs precompute(const FeatureMatrix& pool) const = 0;
    // Pure aggregation over a subset of pool rows (indices may repeat).
    virtual PrevalenceVector aggregate(const ClassifierOutputs& outputs,
                                       std::span<const std::size_t> indices) const = 0;

    PrevalenceVector quantify(const FeatureMatrix& instances) const override {
        require_fitted();
        const ClassifierOutputs outputs = precompute(instances);
        std::vector<std::size_t> all(instances.rows());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return aggregate(outputs, all);
    }
};

// Shared plumbing for methods built on the pluggable Learner: holds the
// learner and routes `learner.`-prefixed parameters to it.
class LearnerBackedQuantifier : public AggregativeQuantifier {
public:
    explicit LearnerBackedQuantifier(std::unique_ptr<Learner> learner) : learner_(std::move(learner)) {
        if (!learner_) throw std::invalid_argument("quantifier needs a learner");
    }
    LearnerBackedQuantifier(const LearnerBackedQuantifier& other)
        : AggregativeQuantifier(other), learner_(other.learner_->clone()) {}

    const Learner& learner() const { return *learner_; }

    ParamMap get_params() const override {
        ParamMap out = own_params();
        for (const auto& [k, v] : learner_->params()) out.emplace("learner." + k, v);
        return out;
    }

    void set_params(const ParamMap& params) override {
        for (const auto& [k, v] : params) {
            if (k.rfind("learner.", 0) == 0) learner_->set_param(k.substr(8), v);
            else set_own_param(k, v);
        }
    }

protected:
    virtual ParamMap own_params() const { return {}; }
    virtual void set_own_param(const std::string& key, const ParamValue&) {
        throw std::invalid_argument(name() + " has no parameter '" + key + "'");
    }

    std::unique_ptr<Learner> learner_;
};

}  // namespace quantkit

#pragma once

// Labelled data model and prevalence-controlled sampling: the substrate every
// protocol and quantifier draws from. Collections are immutable once built.

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "quantkit/core.hpp"

namespace quantkit {

struct SparseEntry {
    std::size_t index;
    double value;
};

// Feature storage behind one interface: dense row-major values or per-row
// sparse entry lists. Consumers only need dot products and per-feature
// iteration, so both representations stay cheap.
class FeatureMatrix {
public:
    FeatureMatrix() = default;

    static FeatureMatrix dense(std::vector<double> values, std::size_t rows, std::size_t dim) {
        if (values.size() != rows * dim)
            throw std::invalid_argument("FeatureMatrix::dense: size mismatch");
        FeatureMatrix m;
        m.dense_values_ = std::move(values);
        m.rows_ = rows;
        m.dim_ = dim;
        m.is_dense_ = true;
        return m;
    }

    static FeatureMatrix sparse(std::vector<std::vector<SparseEntry>> rows, std::size_t dim) {
        FeatureMatrix m;
        m.rows_ = rows.size();
        m.dim_ = dim;
        m.is_dense_ = false;
        m.sparse_offsets_.reserve(rows.size() + 1);
        m.sparse_offsets_.push_back(0);
        for (auto& r : rows) {
            for (const auto& e : r)
                if (e.index >= dim)
                    throw std::invalid_argument("FeatureMatrix::sparse: feature index out of range");
            m.sparse_entries_.insert(m.sparse_entries_.end(), r.begin(), r.end());
            m.sparse_offsets_.push_back(m.sparse_entries_.size());
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t dim() const { return dim_; }
    bool is_dense() const { return is_dense_; }

    double dot(std::size_t row, std::span<const double> w) const {
        double acc = 0.0;
        if (is_dense_) {
            const double* x = dense_values_.data() + row * dim_;
            for (std::size_t j = 0; j < dim_; ++j) acc += x[j] * w[j];
        } else {
            for (std::size_t k = sparse_offsets_[row]; k < sparse_offsets_[row + 1]; ++k)
                acc += sparse_entries_[k].value * w[sparse_entries_[k].index];
        }
        return acc;
    }

    // Calls f(feature_index, value) for every stored feature of `row`.
    template <typename F>
    void for_features(std::size_t row, F&& f) const {
        if (is_dense_) {
            const double* x = dense_values_.data() + row * dim_;
            for (std::size_t j = 0; j < dim_; ++j) f(j, x[j]);
        } else {
            for (std::size_t k = sparse_offsets_[row]; k < sparse_offsets_[row + 1]; ++k)
                f(sparse_entries_[k].index, sparse_entries_[k].value);
        }
    }

    std::vector<double> dense_row(std::size_t row) const {
        std::vector<double> out(dim_, 0.0);
        for_features(row, [&](std::size_t j, double v) { out[j] = v; });
        return out;
    }

    // Row subset (indices may repeat).
    FeatureMatrix select(std::span<const std::size_t> indices) const {
        if (is_dense_) {
            std::vector<double> values;
            values.reserve(indices.size() * dim_);
            for (std::size_t i : indices) {
                const double* x = dense_values_.data() + i * dim_;
                values.insert(values.end(), x, x + dim_);
            }
            return dense(std::move(values), indices.size(), dim_);
        }
        std::vector<std::vector<SparseEntry>> rows;
        rows.reserve(indices.size());
        for (std::size_t i : indices) {
            rows.emplace_back(sparse_entries_.begin() + static_cast<std::ptrdiff_t>(sparse_offsets_[i]),
                              sparse_entries_.begin() + static_cast<std::ptrdiff_t>(sparse_offsets_[i + 1]));
        }
        return sparse(std::move(rows), dim_);
    }

private:
    std::vector<double> dense_values_;
    std::vector<SparseEntry> sparse_entries_;
    std::vector<std::size_t> sparse_offsets_;
    std::size_t rows_ = 0;
    std::size_t dim_ = 0;
    bool is_dense_ = true;
};

// Instances plus labels plus the ordered category list. Labels are stored as
// indices into `categories()`; the string labels are kept for IO.
class LabelledCollection {
public:
    // Categories inferred in order of first appearance in `labels`.
    LabelledCollection(FeatureMatrix features, const std::vector<std::string>& labels)
        : LabelledCollection(std::move(features), labels, infer_categories(labels)) {}

    // Explicit category order; every label must belong to it.
    LabelledCollection(FeatureMatrix features, const std::vector<std::string>& labels,
                       std::vector<std::string> categories)
        : features_(std::move(features)), categories_(std::move(categories)) {
        if (labels.size() != features_.rows())
            throw std::invalid_argument("LabelledCollection: labels/instances length mismatch");
        if (features_.rows() == 0)
            throw std::invalid_argument("LabelledCollection: empty collection");
        if (categories_.size() < 2)
            throw std::invalid_argument("LabelledCollection: need at least 2 categories");
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < categories_.size(); ++i) {
            if (!index.emplace(categories_[i], i).second)
                throw std::invalid_argument("LabelledCollection: duplicate category '" + categories_[i] + "'");
        }
        label_ids_.reserve(labels.size());
        for (const auto& l : labels) {
            auto it = index.find(l);
            if (it == index.end())
                throw std::invalid_argument("LabelledCollection: label '" + l + "' not in categories");
            label_ids_.push_back(it->second);
        }
        build_category_index();
    }

    // From pre-resolved label ids.
    LabelledCollection(FeatureMatrix features, std::vector<std::size_t> label_ids,
                       std::vector<std::string> categories)
        : features_(std::move(features)), label_ids_(std::move(label_ids)), categories_(std::move(categories)) {
        if (label_ids_.size() != features_.rows())
            throw std::invalid_argument("LabelledCollection: labels/instances length mismatch");
        if (features_.rows() == 0)
            throw std::invalid_argument("LabelledCollection: empty collection");
        if (categories_.size() < 2)
            throw std::invalid_argument("LabelledCollection: need at least 2 categories");
        for (std::size_t id : label_ids_)
            if (id >= categories_.size())
                throw std::invalid_argument("LabelledCollection: label id out of range");
        build_category_index();
    }

    std::size_t size() const { return features_.rows(); }
    std::size_t num_categories() const { return categories_.size(); }
    const FeatureMatrix& features() const { return features_; }
    const std::vector<std::size_t>& label_ids() const { return label_ids_; }
    const std::vector<std::string>& categories() const { return categories_; }
    const std::string& label_of(std::size_t i) const { return categories_[label_ids_[i]]; }
    const std::vector<std::size_t>& indices_of(std::size_t category) const { return by_category_[category]; }
    std::size_t count_of(std::size_t category) const { return by_category_[category].size(); }

    PrevalenceVector prevalence() const {
        PrevalenceVector p(categories_.size(), 0.0);
        for (std::size_t id : label_ids_) p[id] += 1.0;
        for (double& v : p) v /= static_cast<double>(label_ids_.size());
        return p;
    }

    LabelledCollection select(std::span<const std::size_t> indices) const {
        if (indices.empty())
            throw std::invalid_argument("LabelledCollection::select: empty selection");
        std::vector<std::size_t> ids;
        ids.reserve(indices.size());
        for (std::size_t i : indices) {
            if (i >= size()) throw std::out_of_range("LabelledCollection::select: index out of range");
            ids.push_back(label_ids_[i]);
        }
        return LabelledCollection(features_.select(indices), std::move(ids), categories_);
    }

    // Binary one-vs-rest view: positive category at index 1.
    LabelledCollection relabel_one_vs_rest(std::size_t positive_category) const {
        std::vector<std::size_t> ids;
        ids.reserve(size());
        for (std::size_t id : label_ids_) ids.push_back(id == positive_category ? 1u : 0u);
        return LabelledCollection(features_, std::move(ids), {"0", "1"});
    }

private:
    static std::vector<std::string> infer_categories(const std::vector<std::string>& labels) {
        std::vector<std::string> cats;
        std::map<std::string, bool> seen;
        for (const auto& l : labels) {
            if (!seen.count(l)) {
                seen[l] = true;
                cats.push_back(l);
            }
        }
        return cats;
    }

    void build_category_index() {
        by_category_.assign(categories_.size(), {});
        for (std::size_t i = 0; i < label_ids_.size(); ++i) by_category_[label_ids_[i]].push_back(i);
    }

    FeatureMatrix features_;
    std::vector<std::size_t> label_ids_;
    std::vector<std::string> categories_;
    std::vector<std::vector<std::size_t>> by_category_;
};

// A training/test pair sharing one category order.
struct Dataset {
    LabelledCollection training;
    LabelledCollection test;
    std::string name;

    Dataset(LabelledCollection tr, LabelledCollection te, std::string n)
        : training(std::move(tr)), test(std::move(te)), name(std::move(n)) {
        if (training.categories() != test.categories())
            throw std::invalid_argument("Dataset: training and test categories differ");
    }
};

// ---------------------------------------------------------------------------
// Largest-remainder rounding of size*prev_i; ties by lowest category index.
// ---------------------------------------------------------------------------
inline std::vector<std::size_t> counts_for_prevalence(std::size_t size, std::span<const double> prev) {
    check_prevalence_vector(prev, "counts_for_prevalence");
    const std::size_t c = prev.size();
    std::vector<std::size_t> counts(c);
    std::vector<std::pair<double, std::size_t>> remainders;  // (-remainder, index) for stable ordering
    remainders.reserve(c);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < c; ++i) {
        const double quota = static_cast<double>(size) * prev[i];
        counts[i] = static_cast<std::size_t>(quota);
        assigned += counts[i];
        remainders.emplace_back(-(quota - static_cast<double>(counts[i])), i);
    }
    std::sort(remainders.begin(), remainders.end());
    for (std::size_t k = 0; assigned < size; ++k, ++assigned) counts[remainders[k % c].second] += 1;
    return counts;
}

// Draws a sample hitting `prev` as closely as largest-remainder rounding
// allows. Within a category items are drawn uniformly without replacement;
// a category with fewer items than requested switches to with-replacement
// so the full prevalence grid stays feasible.
inline std::vector<std::size_t> sample_indices_at_prevalence(const LabelledCollection& coll, std::size_t size,
                                                             std::span<const double> prev, std::uint64_t seed) {
    if (size == 0) throw std::invalid_argument("sample_indices_at_prevalence: size must be positive");
    if (prev.size() != coll.num_categories())
        throw std::invalid_argument("sample_indices_at_prevalence: prevalence length mismatch");
    const auto counts = counts_for_prevalence(size, prev);
    Rng rng(seed);
    std::vector<std::size_t> out;
    out.reserve(size);
    for (std::size_t cat = 0; cat < counts.size(); ++cat) {
        const std::size_t want = counts[cat];
        if (want == 0) continue;
        const auto& pool = coll.indices_of(cat);
        if (pool.empty())
            throw std::runtime_error("sample_indices_at_prevalence: category '" + coll.categories()[cat] +
                                     "' has no items but a positive target count");
        if (want <= pool.size()) {
            // partial Fisher-Yates over a copy of the category pool
            std::vector<std::size_t> local(pool);
            for (std::size_t k = 0; k < want; ++k) {
                const std::size_t j = k + rng.bounded(local.size() - k);
                std::swap(local[k], local[j]);
                out.push_back(local[k]);
            }
        } else {
            for (std::size_t k = 0; k < want; ++k) out.push_back(pool[rng.bounded(pool.size())]);
        }
    }
    return out;
}

inline LabelledCollection sample_at_prevalence(const LabelledCollection& coll, std::size_t size,
                                               std::span<const double> prev, std::uint64_t seed) {
    const auto idx = sample_indices_at_prevalence(coll, size, prev, seed);
    return coll.select(idx);
}

// Uniform sample of `size` indices; without replacement when the pool is
// large enough, otherwise with replacement (caller decides whether to allow).
inline std::vector<std::size_t> sample_indices_uniform(std::size_t pool_size, std::size_t size, std::uint64_t seed,
                                                       bool with_replacement) {
    Rng rng(seed);
    std::vector<std::size_t> out;
    out.reserve(size);
    if (with_replacement) {
        for (std::size_t k = 0; k < size; ++k) out.push_back(rng.bounded(pool_size));
        return out;
    }
    if (size > pool_size)
        throw std::invalid_argument("sample_indices_uniform: size exceeds pool without replacement");
    std::vector<std::size_t> local(pool_size);
    std::iota(local.begin(), local.end(), std::size_t{0});
    for (std::size_t k = 0; k < size; ++k) {
        const std::size_t j = k + rng.bounded(local.size() - k);
        std::swap(local[k], local[j]);
        out.push_back(local[k]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stratified split: the second part holds ~fraction of the items with
// per-category proportions preserved via largest remainder.
// ---------------------------------------------------------------------------
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_stratified_indices(
    const LabelledCollection& coll, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::invalid_argument("split_stratified: fraction must lie in (0,1)");
    const std::size_t c = coll.num_categories();
    const std::size_t total = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(coll.size())));
    std::vector<std::size_t> quotas(c);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < c; ++i) {
        const double q = fraction * static_cast<double>(coll.count_of(i));
        quotas[i] = static_cast<std::size_t>(q);
        assigned += quotas[i];
        remainders.emplace_back(-(q - static_cast<double>(quotas[i])), i);
    }
    std::sort(remainders.begin(), remainders.end());
    for (std::size_t k = 0; assigned < total && k < c * 2; ++k, ++assigned)
        quotas[remainders[k % c].second] += 1;
    for (std::size_t i = 0; i < c; ++i) {
        if (quotas[i] == 0 || quotas[i] >= coll.count_of(i))
            throw std::runtime_error("split_stratified: category '" + coll.categories()[i] +
                                     "' would be empty on one side");
    }
    Rng rng(seed);
    std::vector<std::size_t> first, second;
    for (std::size_t cat = 0; cat < c; ++cat) {
        std::vector<std::size_t> local(coll.indices_of(cat));
        rng.shuffle(local);
        for (std::size_t k = 0; k < local.size(); ++k)
            (k < quotas[cat] ? second : first).push_back(local[k]);
    }
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    return {std::move(first), std::move(second)};
}

inline std::pair<LabelledCollection, LabelledCollection> split_stratified(const LabelledCollection& coll,
                                                                          double fraction, std::uint64_t seed) {
    auto [first, second] = split_stratified_indices(coll, fraction, seed);
    return {coll.select(first), coll.select(second)};
}

// ---------------------------------------------------------------------------
// Stratified k-fold partition; every item lands in exactly one heldout part.
// ---------------------------------------------------------------------------
struct Fold {
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> heldout_indices;
};

inline std::vector<Fold> kfold_indices(const LabelledCollection& coll, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("kfold: k must be at least 2");
    for (std::size_t cat = 0; cat < coll.num_categories(); ++cat)
        if (coll.count_of(cat) < k)
            throw std::runtime_error("kfold: category '" + coll.categories()[cat] + "' has fewer than k items");
    std::vector<std::vector<std::size_t>> heldout(k);
    Rng rng(seed);
    for (std::size_t cat = 0; cat < coll.num_categories(); ++cat) {
        std::vector<std::size_t> local(coll.indices_of(cat));
        rng.shuffle(local);
        for (std::size_t j = 0; j < local.size(); ++j) heldout[j % k].push_back(local[j]);
    }
    std::vector<Fold> folds(k);
    for (std::size_t f = 0; f < k; ++f) {
        std::sort(heldout[f].begin(), heldout[f].end());
        folds[f].heldout_indices = heldout[f];
        for (std::size_t g = 0; g < k; ++g) {
            if (g == f) continue;
            folds[f].train_indices.insert(folds[f].train_indices.end(), heldout[g].begin(), heldout[g].end());
        }
        std::sort(folds[f].train_indices.begin(), folds[f].train_indices.end());
    }
    return folds;
}

inline std::vector<std::pair<LabelledCollection, LabelledCollection>> kfold(const LabelledCollection& coll,
                                                                            std::size_t k, std::uint64_t seed) {
    std::vector<std::pair<LabelledCollection, LabelledCollection>> out;
    for (const auto& fold : kfold_indices(coll, k, seed))
        out.emplace_back(coll.select(fold.train_indices), coll.select(fold.heldout_indices));
    return out;
}

}  // namespace quantkit

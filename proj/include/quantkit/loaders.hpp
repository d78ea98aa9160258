#pragma once

// File loaders and the synthetic Gaussian generator.
//
// Dense CSV: one row per instance, label in a named or indexed column, all
// other columns real-valued features. Sparse: `label idx:val idx:val ...`
// per line, 1-based or 0-based indices selected by flag.

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "quantkit/core.hpp"
#include "quantkit/data.hpp"

namespace quantkit {

struct DenseCsvOptions {
    bool has_header = true;
    // Column holding the label: a header name, or a 0-based index given as an
    // integer string (negative counts from the end). Empty means last column.
    std::string label_column;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    fields.push_back(cur);
    for (auto& f : fields) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t' || f.front() == '\r')) f.erase(f.begin());
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.pop_back();
    }
    return fields;
}

inline bool parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end;
}

inline bool parse_long(const std::string& s, long& out) {
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end;
}

[[noreturn]] inline void parse_error(const std::string& path, std::size_t line_no, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace detail

inline LabelledCollection load_dense_csv(const std::string& path, const DenseCsvOptions& opt = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_dense_csv: cannot open '" + path + "'");

    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    if (opt.has_header) {
        if (!std::getline(in, line)) detail::parse_error(path, 1, "missing header");
        ++line_no;
        header = detail::split_csv_line(line);
    }

    // Resolve the label column once the width is known.
    auto resolve_label = [&](std::size_t width) -> std::size_t {
        if (opt.label_column.empty()) return width - 1;
        long idx = 0;
        if (detail::parse_long(opt.label_column, idx)) {
            if (idx < 0) idx += static_cast<long>(width);
            if (idx < 0 || idx >= static_cast<long>(width))
                throw std::runtime_error("load_dense_csv: label column index out of range");
            return static_cast<std::size_t>(idx);
        }
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == opt.label_column) return i;
        throw std::runtime_error("load_dense_csv: no column named '" + opt.label_column + "'");
    };

    std::vector<double> values;
    std::vector<std::string> labels;
    std::optional<std::size_t> label_idx;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        const auto fields = detail::split_csv_line(line);
        if (!label_idx) {
            width = fields.size();
            if (width < 2) detail::parse_error(path, line_no, "need at least one feature and a label");
            label_idx = resolve_label(width);
        }
        if (fields.size() != width)
            detail::parse_error(path, line_no, "expected " + std::to_string(width) + " columns, got " +
                                                   std::to_string(fields.size()));
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i == *label_idx) {
                labels.push_back(fields[i]);
                continue;
            }
            double v = 0.0;
            if (!detail::parse_double(fields[i], v))
                detail::parse_error(path, line_no, "cannot parse '" + fields[i] + "' as a real number");
            values.push_back(v);
        }
    }
    if (labels.empty()) throw std::runtime_error("load_dense_csv: '" + path + "' holds no instances");
    return LabelledCollection(FeatureMatrix::dense(std::move(values), labels.size(), width - 1), labels);
}

inline LabelledCollection load_sparse(const std::string& path, bool one_based_indices = true) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_sparse: cannot open '" + path + "'");
    std::vector<std::vector<SparseEntry>> rows;
    std::vector<std::string> labels;
    std::size_t dim = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string label;
        if (!(ls >> label)) continue;  // blank line
        labels.push_back(label);
        std::vector<SparseEntry> row;
        std::string tok;
        while (ls >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos)
                detail::parse_error(path, line_no, "expected idx:val, got '" + tok + "'");
            long raw_idx = 0;
            double v = 0.0;
            if (!detail::parse_long(tok.substr(0, colon), raw_idx))
                detail::parse_error(path, line_no, "bad feature index in '" + tok + "'");
            if (!detail::parse_double(tok.substr(colon + 1), v))
                detail::parse_error(path, line_no, "bad feature value in '" + tok + "'");
            if (one_based_indices) raw_idx -= 1;
            if (raw_idx < 0) detail::parse_error(path, line_no, "feature index below the valid range");
            const auto idx = static_cast<std::size_t>(raw_idx);
            dim = std::max(dim, idx + 1);
            row.push_back({idx, v});
        }
        rows.push_back(std::move(row));
    }
    if (labels.empty()) throw std::runtime_error("load_sparse: '" + path + "' holds no instances");
    return LabelledCollection(FeatureMatrix::sparse(std::move(rows), dim), labels);
}

// Re-labels `test` against the category order of `training`; test files must
// not introduce new categories.
inline Dataset make_dataset(const LabelledCollection& training, const LabelledCollection& test_raw,
                            std::string name) {
    std::vector<std::size_t> ids;
    ids.reserve(test_raw.size());
    const auto& cats = training.categories();
    for (std::size_t i = 0; i < test_raw.size(); ++i) {
        const std::string& label = test_raw.label_of(i);
        auto it = std::find(cats.begin(), cats.end(), label);
        if (it == cats.end())
            throw std::runtime_error("make_dataset: test label '" + label + "' not present in training");
        ids.push_back(static_cast<std::size_t>(it - cats.begin()));
    }
    return Dataset(training, LabelledCollection(test_raw.features(), std::move(ids), cats), std::move(name));
}

// c isotropic unit-variance Gaussian blobs with pairwise mean distance
// `separation`, balanced over categories, split 50/50 stratified.
// Means sit at (separation/sqrt(2)) * e_i in c dimensions (c=2 uses 2 dims),
// which makes every pair of means exactly `separation` apart.
inline Dataset synth_gaussian(std::size_t n, std::size_t c, double separation, std::uint64_t seed) {
    if (c < 2) throw std::invalid_argument("synth_gaussian: need at least 2 categories");
    if (n < 2 * c) throw std::invalid_argument("synth_gaussian: n must be at least 2c");
    if (separation < 0.0) throw std::invalid_argument("synth_gaussian: separation must be nonnegative");
    const std::size_t dim = c;
    const double coord = separation / std::sqrt(2.0);

    const auto counts = counts_for_prevalence(n, uniform_prevalence(c));
    Rng rng(derive_seed(seed, 0xda7a));
    std::vector<double> values;
    values.reserve(n * dim);
    std::vector<std::string> labels;
    labels.reserve(n);
    for (std::size_t cat = 0; cat < c; ++cat) {
        for (std::size_t k = 0; k < counts[cat]; ++k) {
            for (std::size_t j = 0; j < dim; ++j)
                values.push_back((j == cat ? coord : 0.0) + rng.gauss());
            labels.push_back(std::to_string(cat));
        }
    }
    LabelledCollection all(FeatureMatrix::dense(std::move(values), n, dim), labels);
    auto [train, test] = split_stratified(all, 0.5, derive_seed(seed, 0x5b17));
    return Dataset(std::move(train), std::move(test), "gaussian");
}

}  // namespace quantkit

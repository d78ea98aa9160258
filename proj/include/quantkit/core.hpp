#pragma once

// Shared primitives: prevalence vectors, a small row-major matrix, portable
// deterministic RNG, and the handful of numeric helpers used across modules.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace quantkit {

// A prevalence vector: one nonnegative entry per category, summing to 1.
using PrevalenceVector = std::vector<double>;

inline constexpr double kPrevalenceTol = 1e-8;

inline bool is_prevalence_vector(std::span<const double> p, double tol = kPrevalenceTol) {
    if (p.empty()) return false;
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) return false;
        sum += v;
    }
    return std::abs(sum - 1.0) <= tol;
}

inline void check_prevalence_vector(std::span<const double> p, const char* where) {
    if (!is_prevalence_vector(p))
        throw std::invalid_argument(std::string(where) + ": not a valid prevalence vector");
}

inline PrevalenceVector uniform_prevalence(std::size_t c) {
    if (c == 0) throw std::invalid_argument("uniform_prevalence: c must be positive");
    return PrevalenceVector(c, 1.0 / static_cast<double>(c));
}

// L1-normalizes a nonnegative vector. Throws if the total mass is zero.
inline PrevalenceVector l1_normalized(std::vector<double> v) {
    double sum = std::accumulate(v.begin(), v.end(), 0.0);
    if (sum <= 0.0) throw std::invalid_argument("l1_normalized: zero total mass");
    for (double& x : v) x /= sum;
    return v;
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Dense row-major matrix, just large enough for posterior tables and rate matrices.
struct Matrix {
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : values(r * c, fill), rows(r), cols(c) {}

    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
    std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
};

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 produces a standardized stream; the helpers
// below avoid std::*_distribution, whose output is implementation-defined.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable seed derivation for nested deterministic streams (campaign -> sample).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(splitmix64(seed) ^ (a + 0x9e3779b97f4a7c15ULL)) ^ b);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x6a09e667f3bcc908ULL)) {}

    std::uint64_t next_u64() {
        state_ = splitmix64(state_);
        return state_;
    }

    // Unbiased integer in [0, n) via rejection.
    std::uint64_t bounded(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::bounded: n must be positive");
        const std::uint64_t min = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= min) return r % n;
        }
    }

    // Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller.
    double gauss() {
        double u1 = 0.0;
        do { u1 = uniform(); } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
    }

    // In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[bounded(i)]);
    }

private:
    std::uint64_t state_;
};

// Uniform point on the probability simplex via sorted-uniform gaps.
inline PrevalenceVector uniform_simplex(std::size_t c, Rng& rng) {
    if (c < 1) throw std::invalid_argument("uniform_simplex: c must be positive");
    if (c == 1) return {1.0};
    std::vector<double> cuts(c - 1);
    for (double& u : cuts) u = rng.uniform();
    std::sort(cuts.begin(), cuts.end());
    PrevalenceVector p(c);
    double prev = 0.0;
    for (std::size_t i = 0; i + 1 < c; ++i) {
        p[i] = cuts[i] - prev;
        prev = cuts[i];
    }
    p[c - 1] = 1.0 - prev;
    return p;
}

// ---------------------------------------------------------------------------
// Small statistics helpers.
// ---------------------------------------------------------------------------

inline double mean_of(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean_of: empty input");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double population_stddev(std::span<const double> v) {
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

inline double sample_stddev(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

// Type-7 quantile (linear interpolation between order statistics); `sorted`
// must be ascending and nonempty.
inline double quantile_type7(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile_type7: empty input");
    if (p <= 0.0) return sorted.front();
    if (p >= 1.0) return sorted.back();
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const std::size_t lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median_of: empty input");
    std::sort(v.begin(), v.end());
    return quantile_type7(v, 0.5);
}

// Locale-independent fixed formatting, used for every value that reaches a file.
inline std::string format_fixed(double v, int decimals = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

// ---------------------------------------------------------------------------
// Index-parallel loop. Each index writes only its own slot, so results are
// identical regardless of scheduling; jobs <= 1 runs inline.
// ---------------------------------------------------------------------------

template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
    if (jobs <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min<std::size_t>({static_cast<std::size_t>(jobs), hw, n});
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::atomic<bool> failed{false};
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= n || failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failed.load()) throw std::runtime_error("parallel_for: a task failed");
}

}  // namespace quantkit

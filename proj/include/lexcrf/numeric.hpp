#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace lexcrf {

// Log-space weights use a large negative sentinel instead of -inf so that
// masked cells never produce NaN through (-inf) - (-inf).
inline constexpr double kNegInf = -1e18;
inline constexpr double kNegInfGuard = -0.5e18;

inline bool is_neg_inf(double x) { return x <= kNegInfGuard; }

// Saturating log-space product: a * b in probability space.
inline double log_mul(double a, double b) {
    if (is_neg_inf(a) || is_neg_inf(b)) return kNegInf;
    return a + b;
}

inline double log_add(double a, double b) {
    if (is_neg_inf(a)) return b;
    if (is_neg_inf(b)) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> xs) {
    double m = kNegInf;
    for (double x : xs)
        if (x > m) m = x;
    if (is_neg_inf(m)) return kNegInf;
    double s = 0.0;
    for (double x : xs)
        if (!is_neg_inf(x)) s += std::exp(x - m);
    return m + std::log(s);
}

// exp(a - b) with sentinel guards; used when turning chart values into
// posterior weights.
inline double safe_exp_diff(double a, double b) {
    if (is_neg_inf(a) || is_neg_inf(b)) return 0.0;
    return std::exp(a - b);
}

// Deterministic uniform numbers: mt19937_64 output mapped to [0,1) by hand,
// since std::uniform_real_distribution is implementation-defined.
template <typename Rng>
double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename Rng>
double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

template <typename Rng>
std::size_t uniform_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

// Fisher-Yates with our own index draw; std::shuffle is implementation-defined.
template <typename T, typename Rng>
void deterministic_shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = uniform_index(rng, i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace lexcrf

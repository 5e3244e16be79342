#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace safewcet {

/// Average ranks (1-based) of the pooled sample; ties share the mean rank.
inline std::vector<double> average_ranks(const std::vector<double>& pooled, double* tie_term = nullptr) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
    std::vector<double> rank(n);
    double ties = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
        const double t = static_cast<double>(j - i + 1);
        ties += t * t * t - t;
        i = j + 1;
    }
    if (tie_term) *tie_term = ties;
    return rank;
}

/// Number of orderings of n a's and m b's with exactly u (a,b) pairs where
/// the a is larger, for u = 0..n*m.
inline std::vector<double> mann_whitney_counts(std::size_t n, std::size_t m) {
    // f[i][j][u] via rolling over i; f(i,j,u) = f(i-1,j,u-j) + f(i,j-1,u)
    std::vector<std::vector<double>> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = {1.0};
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = {1.0};
        for (std::size_t j = 1; j <= m; ++j) {
            cur[j].assign(i * j + 1, 0.0);
            for (std::size_t u = 0; u < prev[j].size(); ++u) cur[j][u + j] += prev[j][u];
            for (std::size_t u = 0; u < cur[j - 1].size(); ++u) cur[j][u] += cur[j - 1][u];
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

struct Comparison {
    double u = 0;        // U statistic of sample a
    double p_value = 1;  // two-sided
    double a12 = 0.5;    // P(a > b) + 0.5 P(a = b)
    bool exact = false;
};

/// Two-sided Mann-Whitney U test and Vargha-Delaney A12 of a against b.
/// Exact null distribution for tie-free samples up to 50 per group; normal
/// approximation with tie and continuity correction otherwise.
inline Comparison compare_samples(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("compare needs two non-empty samples");
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    double ties = 0;
    const auto rank = average_ranks(pooled, &ties);
    const double ra = std::accumulate(rank.begin(), rank.begin() + static_cast<std::ptrdiff_t>(a.size()), 0.0);
    Comparison c;
    c.u = ra - na * (na + 1) / 2;
    c.a12 = (ra / na - (na + 1) / 2) / nb;
    if (ties == 0 && a.size() <= 50 && b.size() <= 50) {
        const auto counts = mann_whitney_counts(a.size(), b.size());
        const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
        const auto u = static_cast<std::size_t>(std::llround(c.u));
        double lower = 0, upper = 0;
        for (std::size_t k = 0; k < counts.size(); ++k) (k <= u ? lower : upper) += counts[k];
        upper += counts[u];
        c.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / total);
        c.exact = true;
        return c;
    }
    const double n = na + nb;
    const double mean = na * nb / 2;
    const double var = na * nb / 12 * ((n + 1) - ties / (n * (n - 1)));
    if (var <= 0) return c;
    const double z = std::max(0.0, std::abs(c.u - mean) - 0.5) / std::sqrt(var);
    c.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    return c;
}

}  // namespace safewcet

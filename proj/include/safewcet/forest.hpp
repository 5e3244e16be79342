#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "safewcet/parallel.hpp"
#include "safewcet/rng.hpp"

namespace safewcet {

struct ForestConfig {
    std::size_t trees = 100;
    std::size_t depth = 0;        // 0: ceil(sqrt(feature count))
    std::size_t max_features = 0; // features tried per split; 0: ceil(sqrt(feature count))
    std::size_t bins = 256;       // candidate thresholds per feature (quantile cut points)
    std::size_t min_leaf = 1;
};

inline std::size_t ceil_sqrt(std::size_t n) {
    std::size_t r = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    return std::max<std::size_t>(r, 1);
}

namespace detail {

inline double gini(double pos, double n) {
    if (n <= 0) return 0.0;
    const double q = pos / n;
    return 2.0 * q * (1.0 - q);
}

/// Column-wise bin codes: each value maps to the index of the first cut point
/// not below it, so "code <= b" means "value <= cuts[b]".
struct Binned {
    std::vector<std::vector<double>> cuts;    // per feature, ascending
    std::vector<std::vector<std::uint16_t>> code;  // per feature, per row
};

inline Binned bin_columns(const std::vector<std::vector<double>>& x, std::size_t features, std::size_t bins) {
    Binned b;
    b.cuts.resize(features);
    b.code.resize(features);
    for (std::size_t f = 0; f < features; ++f) {
        std::vector<double> col;
        col.reserve(x.size());
        for (const auto& row : x) col.push_back(row[f]);
        std::vector<double> uniq = col;
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        if (uniq.size() <= bins) {
            b.cuts[f] = uniq;
        } else {
            std::vector<double> sorted = col;
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t k = 1; k <= bins; ++k) b.cuts[f].push_back(sorted[std::min(sorted.size() - 1, k * sorted.size() / bins)]);
            b.cuts[f].push_back(uniq.back());
            std::sort(b.cuts[f].begin(), b.cuts[f].end());
            b.cuts[f].erase(std::unique(b.cuts[f].begin(), b.cuts[f].end()), b.cuts[f].end());
        }
        b.code[f].reserve(col.size());
        for (double v : col)
            b.code[f].push_back(static_cast<std::uint16_t>(std::lower_bound(b.cuts[f].begin(), b.cuts[f].end(), v) - b.cuts[f].begin()));
    }
    return b;
}

/// Grows one CART tree on a bootstrap sample and returns its unnormalized
/// impurity decrease per feature.
inline std::vector<double> grow_tree(const Binned& b, const std::vector<std::uint8_t>& y, const ForestConfig& cfg,
                                     std::size_t features, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = y.size();
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = uniform_index(rng, n);
    std::vector<double> importance(features, 0.0);

    struct Node {
        std::vector<std::size_t> rows;
        std::size_t depth;
    };
    std::vector<Node> stack;
    stack.push_back({std::move(rows), 0});
    std::vector<std::size_t> order(features);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> cnt, pos;
    while (!stack.empty()) {
        Node node = std::move(stack.back());
        stack.pop_back();
        const double nn = static_cast<double>(node.rows.size());
        double npos = 0;
        for (std::size_t r : node.rows) npos += y[r];
        if (node.depth >= cfg.depth || npos == 0 || npos == nn || node.rows.size() < 2 * cfg.min_leaf) continue;
        const double parent = nn * gini(npos, nn);

        // Partial Fisher-Yates picks the candidate features for this node.
        const std::size_t tries = std::min(cfg.max_features, features);
        for (std::size_t k = 0; k < tries; ++k) std::swap(order[k], order[k + uniform_index(rng, features - k)]);

        double best_gain = 1e-12;
        std::size_t best_f = features, best_bin = 0;
        for (std::size_t k = 0; k < tries; ++k) {
            const std::size_t f = order[k];
            const std::size_t nb = b.cuts[f].size();
            cnt.assign(nb, 0.0);
            pos.assign(nb, 0.0);
            for (std::size_t r : node.rows) {
                cnt[b.code[f][r]] += 1;
                pos[b.code[f][r]] += y[r];
            }
            double lc = 0, lp = 0;
            for (std::size_t bin = 0; bin + 1 < nb; ++bin) {
                lc += cnt[bin];
                lp += pos[bin];
                const double rc = nn - lc;
                if (lc < static_cast<double>(cfg.min_leaf) || rc < static_cast<double>(cfg.min_leaf)) continue;
                const double gain = parent - lc * gini(lp, lc) - rc * gini(npos - lp, rc);
                if (gain > best_gain) {
                    best_gain = gain;
                    best_f = f;
                    best_bin = bin;
                }
            }
        }
        if (best_f == features) continue;
        importance[best_f] += best_gain;
        Node left{{}, node.depth + 1}, right{{}, node.depth + 1};
        for (std::size_t r : node.rows) (b.code[best_f][r] <= best_bin ? left : right).rows.push_back(r);
        stack.push_back(std::move(right));
        stack.push_back(std::move(left));
    }
    return importance;
}

}  // namespace detail

/// Mean decrease in Gini impurity per feature over a bootstrap forest. Each
/// tree's importances are normalized to sum to one before averaging.
inline std::vector<double> gini_importance(const std::vector<std::vector<double>>& x, const std::vector<std::uint8_t>& y,
                                           ForestConfig cfg, std::uint64_t seed, int jobs = 1) {
    if (x.empty()) throw std::invalid_argument("feature importance needs data");
    const std::size_t features = x.front().size();
    if (cfg.depth == 0) cfg.depth = ceil_sqrt(features);
    if (cfg.max_features == 0) cfg.max_features = ceil_sqrt(features);
    const auto binned = detail::bin_columns(x, features, cfg.bins);
    std::vector<std::vector<double>> per_tree(cfg.trees);
    parallel_for(cfg.trees, jobs, [&](std::size_t t) {
        per_tree[t] = detail::grow_tree(binned, y, cfg, features, derive_seed(seed, {t}));
    });
    std::vector<double> mean(features, 0.0);
    for (const auto& imp : per_tree) {
        const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
        if (total <= 0) continue;
        for (std::size_t f = 0; f < features; ++f) mean[f] += imp[f] / total;
    }
    for (double& m : mean) m /= static_cast<double>(cfg.trees);
    return mean;
}

/// Features whose importance exceeds the threshold (default: the mean
/// importance); never empty, the most important feature is always kept.
inline std::vector<std::size_t> select_features(const std::vector<double>& importance, double threshold = -1.0) {
    if (importance.empty()) return {};
    if (threshold < 0) threshold = std::accumulate(importance.begin(), importance.end(), 0.0) / static_cast<double>(importance.size());
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < importance.size(); ++f)
        if (importance[f] > threshold) out.push_back(f);
    if (out.empty()) out.push_back(static_cast<std::size_t>(std::max_element(importance.begin(), importance.end()) - importance.begin()));
    return out;
}

}  // namespace safewcet

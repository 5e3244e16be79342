#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "safewcet/dataset.hpp"
#include "safewcet/forest.hpp"
#include "safewcet/logistic.hpp"
#include "safewcet/parallel.hpp"
#include "safewcet/search.hpp"

namespace safewcet {

struct UpperThreshold {
    double p_u;
    bool degenerate;  // no unsafe instance scored above every safe one
};

/// Smallest threshold that puts no safe instance into the unsafe area
/// {p >= p_u}: the next double above the highest safe probability.
inline UpperThreshold threshold_no_false_negative(const std::vector<double>& p, const std::vector<std::uint8_t>& unsafe) {
    double max_safe = 0.0, max_unsafe = 0.0;
    for (std::size_t r = 0; r < p.size(); ++r) (unsafe[r] ? max_unsafe : max_safe) = std::max(unsafe[r] ? max_unsafe : max_safe, p[r]);
    const double next = std::nextafter(max_safe, 1.0);
    if (max_unsafe > max_safe) return {next, false};
    return {std::max(0.9999, next), true};
}

/// Largest threshold whose open sublevel set {p < p_s} holds no unsafe
/// instance: the lowest unsafe probability.
inline double threshold_no_false_positive(const std::vector<double>& p, const std::vector<std::uint8_t>& unsafe) {
    double lo = 1.0;
    for (std::size_t r = 0; r < p.size(); ++r)
        if (unsafe[r]) lo = std::min(lo, p[r]);
    return lo;
}

/// First point along axis `axis` (others held at `anchor`) where the model
/// reaches probability `target`, searched over [anchor[axis], hi]; nullopt
/// when the model stays below target on the whole segment.
inline std::optional<double> first_crossing_on_axis(const RsmModel& m, std::vector<double> anchor, std::size_t axis, double hi,
                                                    double target) {
    const double lo = anchor[axis];
    auto p_at = [&](double v) {
        anchor[axis] = v;
        return m.predict(anchor);
    };
    if (p_at(lo) >= target) return lo;
    // The model is quadratic along an axis, so 256 probes cannot step over a
    // crossing pair unless both fall inside one probe cell.
    const int probes = 256;
    double a = lo;
    for (int k = 1; k <= probes; ++k) {
        double b = lo + (hi - lo) * k / probes;
        if (p_at(b) >= target) {
            const double tol = 1e-6 * (hi - lo);
            while (b - a > tol) {
                const double mid = 0.5 * (a + b);
                (p_at(mid) >= target ? b : a) = mid;
            }
            return b;
        }
        a = b;
    }
    return std::nullopt;
}

/// One coordinate box over the model features (milliseconds).
struct Box {
    std::vector<double> lo, hi;
};

/// Reduced upper bounds C'_i: the intercept of each feature axis with the
/// p_u border, other features at their minimum; C^max when there is none.
inline std::vector<double> intercept_bounds(const RsmModel& m, const Box& box, double p_u) {
    std::vector<double> out;
    for (std::size_t i = 0; i < box.lo.size(); ++i)
        out.push_back(first_crossing_on_axis(m, box.lo, i, box.hi[i], p_u).value_or(box.hi[i]));
    return out;
}

/// Importance weight of a candidate for border sampling; 1 on the border.
inline double border_weight(const RsmModel& m, const std::vector<double>& x, double p_s) {
    return std::exp(-std::abs(m.linear_predictor(x) - logit(p_s)));
}

/// Largest grid time not above `ms`.
inline Time floor_to_grid(double ms, Time res) {
    const auto units = static_cast<Time::rep>(std::floor(ms * Time::kUnitsPerMs + 1e-6));
    return Time::from_units(units - units % res.units());
}

/// Draws 10*count uniform candidates (model features inside `box`, other
/// range tasks over their declared range) and keeps `count` of them by
/// weighted sampling without replacement (exponential-key method).
inline std::vector<WcetAssignment> distance_sample(const SystemSpec& spec, const RsmModel& m, double p_s,
                                                   const std::vector<std::size_t>& feature_tasks, const Box& box,
                                                   std::size_t count, Rng& rng) {
    const Time res = spec.scheduler.resolution;
    const std::size_t pool = 10 * count;
    std::vector<WcetAssignment> cand;
    std::vector<double> key;
    cand.reserve(pool);
    std::vector<double> x(feature_tasks.size());
    for (std::size_t c = 0; c < pool; ++c) {
        WcetAssignment w = sample_wcet(spec, rng);
        for (std::size_t f = 0; f < feature_tasks.size(); ++f) {
            const Time lo = spec.tasks[feature_tasks[f]].wcet.lo;
            const Time hi = std::max(lo, floor_to_grid(box.hi[f], res));
            w[feature_tasks[f]] = uniform_time(rng, lo, hi, res);
            x[f] = w[feature_tasks[f]].ms();
        }
        const double weight = border_weight(m, x, p_s);
        const double u = std::max(uniform01(rng), std::numeric_limits<double>::min());
        key.push_back(weight > 0 ? std::log(u) / weight : -std::numeric_limits<double>::infinity());
        cand.push_back(std::move(w));
    }
    std::vector<std::size_t> order(cand.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
    std::vector<WcetAssignment> out;
    for (std::size_t k = 0; k < std::min(count, order.size()); ++k) out.push_back(cand[order[k]]);
    return out;
}

struct BestSize {
    std::vector<double> point;
    bool unconstrained = false;  // the whole box lies below the border
    bool infeasible = false;     // even the minimum corner is on the unsafe side
};

namespace detail {

/// Roots of a*t^2 + b*t + c = 0 (a may vanish), ascending.
inline std::vector<double> quadratic_roots(double a, double b, double c) {
    std::vector<double> r;
    const double scale = std::max({std::abs(a), std::abs(b), std::abs(c), 1e-300});
    if (std::abs(a) <= 1e-13 * scale) {
        if (std::abs(b) > 1e-13 * scale) r.push_back(-c / b);
        return r;
    }
    const double disc = b * b - 4 * a * c;
    if (disc < 0) return r;
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    r.push_back(q / a);
    if (q != 0) r.push_back(c / q);
    std::sort(r.begin(), r.end());
    return r;
}

/// Point where the ray lo + t*(dir) first leaves the safe side (linear
/// predictor reaches L), or the box face when it never does. The predictor is
/// exactly quadratic in t.
struct RayHit {
    std::vector<double> x;
    bool border;
};

inline RayHit ray_to_border(const RsmModel& m, const Box& box, const std::vector<double>& dir, double L) {
    const std::size_t n = dir.size();
    double tmax = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        if (dir[i] > 0) tmax = std::min(tmax, (box.hi[i] - box.lo[i]) / dir[i]);
    if (!std::isfinite(tmax)) return {box.lo, false};
    auto at = [&](double t) {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = std::min(box.lo[i] + t * dir[i], box.hi[i]);
        return x;
    };
    auto eta = [&](double t) { return m.linear_predictor(at(t)); };
    const double e0 = eta(0), e1 = eta(0.5 * tmax), e2 = eta(tmax);
    // Interpolating quadratic in s = t/tmax through s = 0, 0.5, 1.
    const double a = 2 * e2 - 4 * e1 + 2 * e0, b = 4 * e1 - e2 - 3 * e0, c = e0 - L;
    double first = std::numeric_limits<double>::infinity();
    for (double s : quadratic_roots(a, b, c))
        if (s > 0 && s <= 1) first = std::min(first, s);
    if (!std::isfinite(first)) return {at(tmax), false};
    // Polish on the exact predictor so |p - p_s| meets the tolerance.
    double lo = 0, hi = std::min(1.0, first * (1 + 1e-9) + 1e-12);
    if (eta(hi * tmax) < L) hi = std::min(1.0, first + 1e-6);
    for (int k = 0; k < 200 && hi - lo > 1e-15; ++k) {
        const double mid = 0.5 * (lo + hi);
        (eta(mid * tmax) >= L ? hi : lo) = mid;
    }
    return {at(lo * tmax), true};
}

inline double log_volume(const std::vector<double>& x, const Box& box) {
    double v = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double w = x[i] - box.lo[i];
        if (w <= 0) return -std::numeric_limits<double>::infinity();
        v += std::log(w);
    }
    return v;
}

}  // namespace detail

/// Point on the p_s border maximizing the hyperbox volume prod(x_i - lo_i).
/// Each start picks a direction from the minimum corner; the point is the
/// projection of that ray onto the border, and a compass search over the
/// log-direction climbs the log-volume until the gain falls below 1e-6.
inline BestSize best_size_point(const RsmModel& m, double p_s, const Box& box, std::size_t starts, std::uint64_t seed) {
    const std::size_t n = box.lo.size();
    const double L = logit(p_s);
    BestSize out;
    if (m.linear_predictor(box.lo) >= L) {
        out.point = box.lo;
        out.infeasible = true;
        return out;
    }
    std::vector<double> span(n);
    for (std::size_t i = 0; i < n; ++i) span[i] = box.hi[i] - box.lo[i];
    const auto diag = detail::ray_to_border(m, box, span, L);
    if (!diag.border) {
        out.point = box.hi;
        out.unconstrained = true;
        return out;
    }
    auto evaluate = [&](const std::vector<double>& logw) {
        std::vector<double> dir(n);
        for (std::size_t i = 0; i < n; ++i) dir[i] = std::exp(logw[i]) * span[i];
        auto hit = detail::ray_to_border(m, box, dir, L);
        return std::pair{detail::log_volume(hit.x, box), hit.x};
    };
    Rng rng(seed);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < std::max<std::size_t>(starts, 1); ++s) {
        std::vector<double> logw(n);
        for (auto& v : logw) v = std::log(std::max(uniform01(rng), 1e-12));
        auto [cur, x] = evaluate(logw);
        // A sweep gaining less than 1e-6 in log-volume (relative volume gain)
        // halves the step; the search ends once the step is negligible.
        for (double step = 1.0; n > 1 && step > 1e-7;) {
            const double before = cur;
            for (std::size_t i = 0; i < n; ++i) {
                for (double sign : {1.0, -1.0}) {
                    auto trial = logw;
                    trial[i] += sign * step;
                    auto [v, tx] = evaluate(trial);
                    if (v > cur) {
                        logw = std::move(trial);
                        cur = v;
                        x = std::move(tx);
                        break;
                    }
                }
            }
            if (cur - before < 1e-6) step *= 0.5;
        }
        if (cur > best) {
            best = cur;
            out.point = x;
        }
    }
    return out;
}

struct LearnConfig {
    ForestConfig forest;
    double importance_threshold = -1.0;  // negative: mean importance
    std::size_t max_updates = 100;
    std::size_t samples = 100;
    std::size_t kfold = 5;
    std::size_t refine_testcases = 10;
    double target_precision = 0.99;
    std::size_t starts = 20;
    int jobs = 1;
};

struct SafeBorderModel {
    std::vector<std::size_t> features;  // columns of the dataset (range-task order)
    std::vector<std::string> feature_ids;
    std::vector<double> importance;     // per dataset column
    RsmModel model;
    double p_u = 0.9999;
    bool p_u_degenerate = false;
    double p_s = 0.5;
    Box range;                  // [C^min, C^max] of the features
    std::vector<double> reduced;  // C'_i
    BestSize best;
    double precision = 0.0;
    std::size_t updates = 0;
    std::size_t initial_rows = 0, pruned_rows = 0, final_rows = 0;
    std::vector<std::size_t> training_rows;  // dataset rows behind the final fit
};

/// Probability vector and unsafe indicator of a dataset under a model.
inline void score_rows(const RsmModel& m, const std::vector<std::vector<double>>& x, std::vector<double>& p) {
    p.resize(x.size());
    for (std::size_t r = 0; r < x.size(); ++r) p[r] = m.predict(x[r]);
}

/// Stratified k-fold precision of the predicted-safe region {p < p_s}: the
/// share of held-out predicted-safe instances that are truly safe, pooled over
/// folds. Each fold refits the given term set and recomputes p_s on its
/// training part. Zero when no instance is predicted safe.
inline double kfold_precision(const std::vector<std::vector<double>>& x, const std::vector<std::uint8_t>& y, const RsmModel& like,
                              std::size_t k, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::size_t> fold(x.size());
    for (std::uint8_t cls : {0, 1}) {
        std::vector<std::size_t> idx;
        for (std::size_t r = 0; r < y.size(); ++r)
            if (y[r] == cls) idx.push_back(r);
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
        for (std::size_t i = 0; i < idx.size(); ++i) fold[idx[i]] = i % k;
    }
    std::size_t predicted = 0, correct = 0;
    std::vector<double> p;
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<std::vector<double>> tx;
        std::vector<std::uint8_t> ty;
        for (std::size_t r = 0; r < x.size(); ++r)
            if (fold[r] != f) {
                tx.push_back(x[r]);
                ty.push_back(y[r]);
            }
        const std::size_t pos = static_cast<std::size_t>(std::count(ty.begin(), ty.end(), 1));
        if (pos == 0 || pos == ty.size()) continue;
        const RsmModel m = refit_terms(tx, ty, like);
        score_rows(m, tx, p);
        const double ps = threshold_no_false_positive(p, ty);
        for (std::size_t r = 0; r < x.size(); ++r) {
            if (fold[r] != f || !(m.predict(x[r]) < ps)) continue;
            ++predicted;
            correct += y[r] == 0;
        }
    }
    return predicted ? static_cast<double>(correct) / static_cast<double>(predicted) : 0.0;
}

/// Learns the safe border from a labeled dataset and refines it with
/// border-focused samples labeled against the archive's strongest test cases.
/// `data` is extended in place with the refinement rows.
inline SafeBorderModel learn_safe_border(const SystemSpec& spec, LabeledDataset& data, const std::vector<Individual>& archive,
                                         const LearnConfig& cfg, std::uint64_t seed) {
    if (data.tasks.empty()) throw ValidationError("learning needs at least one task with a WCET range");
    if (data.count(Label::safe) == 0 || data.count(Label::unsafe) == 0) throw ValidationError("degenerate labels: dataset needs both safe and unsafe rows");
    SafeBorderModel b;
    b.initial_rows = data.rows.size();

    std::vector<std::size_t> all(data.tasks.size());
    std::iota(all.begin(), all.end(), 0);
    std::vector<std::vector<double>> xall;
    std::vector<std::uint8_t> y;
    for (std::size_t r = 0; r < data.rows.size(); ++r) {
        xall.push_back(data.values(r, all));
        y.push_back(data.rows[r].label == Label::unsafe);
    }
    b.importance = gini_importance(xall, y, cfg.forest, derive_seed(seed, {1}), cfg.jobs);
    b.features = select_features(b.importance, cfg.importance_threshold);
    std::vector<std::size_t> feature_tasks;
    for (std::size_t f : b.features) {
        feature_tasks.push_back(data.tasks[f]);
        b.feature_ids.push_back(spec.tasks[data.tasks[f]].id);
        b.range.lo.push_back(spec.tasks[data.tasks[f]].wcet.lo.ms());
        b.range.hi.push_back(spec.tasks[data.tasks[f]].wcet.hi.ms());
    }
    auto project = [&](std::size_t r) { return data.values(r, b.features); };

    // Imbalance step: fit on everything, find p_u, cut the ranges at the
    // axis intercepts and drop rows beyond them.
    std::vector<std::vector<double>> x;
    for (std::size_t r = 0; r < data.rows.size(); ++r) x.push_back(project(r));
    std::vector<double> p;
    RsmModel first = fit_rsm_logit(x, y).model;
    score_rows(first, x, p);
    const auto pu0 = threshold_no_false_negative(p, y);
    b.reduced = intercept_bounds(first, b.range, pu0.p_u);

    std::vector<std::vector<double>> xb;
    std::vector<std::uint8_t> yb;
    auto& rows = b.training_rows;
    for (std::size_t r = 0; r < x.size(); ++r) {
        bool inside = true;
        for (std::size_t f = 0; f < b.features.size(); ++f) inside = inside && x[r][f] <= b.reduced[f];
        if (!inside) continue;
        xb.push_back(x[r]);
        yb.push_back(y[r]);
        rows.push_back(r);
    }
    const std::size_t pos = static_cast<std::size_t>(std::count(yb.begin(), yb.end(), 1));
    if (pos == 0 || pos == yb.size()) {
        // Pruning removed one class entirely; keep learning on the full data.
        xb = x;
        yb = y;
        rows.resize(x.size());
        std::iota(rows.begin(), rows.end(), 0);
    }
    b.pruned_rows = xb.size();

    auto fit = [&](RsmModel& m, double& ps, double& prec, std::uint64_t round) {
        m = fit_rsm_logit(xb, yb).model;
        score_rows(m, xb, p);
        ps = threshold_no_false_positive(p, yb);
        prec = kfold_precision(xb, yb, m, cfg.kfold, derive_seed(seed, {2, round}));
    };
    fit(b.model, b.p_s, b.precision, 0);

    std::vector<const Individual*> probes;
    for (const auto& ind : archive) probes.push_back(&ind);
    std::stable_sort(probes.begin(), probes.end(), [](const Individual* a, const Individual* c) {
        return a->fit.fd != c->fit.fd ? a->fit.fd > c->fit.fd : a->id < c->id;
    });
    if (probes.size() > cfg.refine_testcases) probes.resize(cfg.refine_testcases);

    const auto targets = spec.target_indices();
    Box reduced_box{b.range.lo, b.reduced};
    for (std::size_t u = 0; u < cfg.max_updates && !probes.empty() && b.precision < cfg.target_precision; ++u) {
        const std::uint64_t round_seed = derive_seed(seed, {3, u});
        Rng rng(round_seed);
        const auto points = distance_sample(spec, b.model, b.p_s, feature_tasks, reduced_box, cfg.samples, rng);
        std::vector<Label> labels(points.size() * probes.size());
        parallel_for(labels.size(), cfg.jobs, [&](std::size_t cell) {
            const auto& w = points[cell / probes.size()];
            labels[cell] = label(spec, simulate(spec, probes[cell % probes.size()]->tc, w), targets);
        });
        for (std::size_t cell = 0; cell < labels.size(); ++cell) {
            const auto& w = points[cell / probes.size()];
            data.append(w, labels[cell], probes[cell % probes.size()]->id, round_seed);
            rows.push_back(data.rows.size() - 1);
            std::vector<double> xv;
            for (std::size_t t : feature_tasks) xv.push_back(w[t].ms());
            xb.push_back(std::move(xv));
            yb.push_back(labels[cell] == Label::unsafe);
        }
        fit(b.model, b.p_s, b.precision, u + 1);
        b.updates = u + 1;
    }

    // Final thresholds on the final training data.
    score_rows(b.model, xb, p);
    const auto pu = threshold_no_false_negative(p, yb);
    b.p_u = pu.p_u;
    b.p_u_degenerate = pu.degenerate;
    b.p_s = std::min(threshold_no_false_positive(p, yb), b.p_u);
    b.final_rows = xb.size();
    b.best = best_size_point(b.model, b.p_s, reduced_box, cfg.starts, derive_seed(seed, {4}));
    return b;
}

/// Safe WCET upper bound per range task (dataset column order): the
/// best-size point on model features, C^max elsewhere.
inline std::vector<Time> border_box(const SystemSpec& spec, const LabeledDataset& data, const SafeBorderModel& b) {
    std::vector<Time> upper;
    for (std::size_t t : data.tasks) upper.push_back(spec.tasks[t].wcet.hi);
    for (std::size_t f = 0; f < b.features.size(); ++f)
        upper[b.features[f]] = std::max(spec.tasks[data.tasks[b.features[f]]].wcet.lo,
                                        floor_to_grid(b.best.point[f], spec.scheduler.resolution));
    return upper;
}

}  // namespace safewcet

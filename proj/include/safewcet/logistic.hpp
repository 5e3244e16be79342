#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace safewcet {

/// One monomial of the second-order response surface: intercept (-1,-1),
/// linear (i,-1), quadratic (i,i) or interaction (i,j) with i<j.
struct Term {
    int i = -1;
    int j = -1;
    friend bool operator==(const Term&, const Term&) = default;

    double eval(const double* x) const {
        if (i < 0) return 1.0;
        if (j < 0) return x[i];
        return x[i] * x[j];
    }
};

/// Intercept, linears, quadratics, then interactions in (i,j) order:
/// 1 + 2w + w(w-1)/2 terms.
inline std::vector<Term> full_rsm_terms(int w) {
    std::vector<Term> t{{-1, -1}};
    for (int i = 0; i < w; ++i) t.push_back({i, -1});
    for (int i = 0; i < w; ++i) t.push_back({i, i});
    for (int i = 0; i < w; ++i)
        for (int j = i + 1; j < w; ++j) t.push_back({i, j});
    return t;
}

inline std::string term_name(const Term& t, const std::vector<std::string>& names) {
    if (t.i < 0) return "1";
    if (t.j < 0) return names[t.i];
    if (t.i == t.j) return names[t.i] + "^2";
    return names[t.i] + "*" + names[t.j];
}

inline double sigmoid(double eta) {
    return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Second-order logistic response surface in raw units. `coef` covers the full
/// term list; terms dropped by AIC selection in standardized space may leave
/// nonzero raw coefficients on lower-order terms after un-standardizing.
struct RsmModel {
    int dims = 0;
    std::vector<Term> terms;          // full term list, see full_rsm_terms
    std::vector<double> coef;         // raw-unit coefficient per term
    std::vector<std::uint8_t> active; // terms kept by the selection step
    bool ridge = false;               // perfect separation forced a penalized fit
    double aic = 0.0;
    std::size_t n = 0;

    double linear_predictor(const double* x) const {
        double eta = 0.0;
        for (std::size_t k = 0; k < terms.size(); ++k) eta += coef[k] * terms[k].eval(x);
        return eta;
    }
    double linear_predictor(const std::vector<double>& x) const { return linear_predictor(x.data()); }

    /// Probability of the unsafe label. The linear predictor is clamped so
    /// the result stays strictly inside (0,1) in double precision.
    double predict(const std::vector<double>& x) const { return sigmoid(std::clamp(linear_predictor(x), -700.0, 36.0)); }

    std::size_t active_count() const { return static_cast<std::size_t>(std::count(active.begin(), active.end(), 1)); }
};

struct FitResult {
    Eigen::VectorXd beta;
    double loglik = -std::numeric_limits<double>::infinity();
    bool converged = false;
    std::size_t steps = 0;
};

namespace detail {

inline double log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
    double ll = 0.0;
    for (Eigen::Index r = 0; r < eta.size(); ++r) {
        // log(1+e^eta) computed without overflow
        const double e = eta[r];
        const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        ll += y[r] * e - softplus;
    }
    return ll;
}

}  // namespace detail

/// Newton-Raphson / IRLS for logistic regression with optional ridge penalty
/// (the penalty never touches column 0). Step-halving keeps the penalized
/// likelihood non-decreasing.
inline FitResult irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double ridge, const Eigen::VectorXd* start = nullptr,
                      std::size_t max_steps = 100, double tol = 1e-8) {
    const Eigen::Index p = X.cols();
    FitResult fr;
    fr.beta = start ? *start : Eigen::VectorXd::Zero(p);
    auto penalized = [&](const Eigen::VectorXd& b) {
        return detail::log_likelihood(X * b, y) - 0.5 * ridge * b.tail(p - 1).squaredNorm();
    };
    double obj = penalized(fr.beta);
    for (fr.steps = 0; fr.steps < max_steps; ++fr.steps) {
        const Eigen::VectorXd eta = X * fr.beta;
        Eigen::VectorXd mu(eta.size()), w(eta.size());
        for (Eigen::Index r = 0; r < eta.size(); ++r) {
            mu[r] = sigmoid(eta[r]);
            w[r] = std::max(mu[r] * (1.0 - mu[r]), 1e-12);
        }
        Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
        Eigen::VectorXd g = X.transpose() * (y - mu);
        if (ridge > 0) {
            H.diagonal().tail(p - 1).array() += ridge;
            g.tail(p - 1) -= ridge * fr.beta.tail(p - 1);
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
        if (ldlt.info() != Eigen::Success) break;
        Eigen::VectorXd delta = ldlt.solve(g);
        if (!delta.allFinite()) break;
        double step = 1.0, next = penalized(fr.beta + delta);
        while (!(next >= obj - 1e-12 * std::abs(obj)) && step > 1e-6) {
            step *= 0.5;
            next = penalized(fr.beta + step * delta);
        }
        fr.beta += step * delta;
        obj = next;
        if ((step * delta).cwiseAbs().maxCoeff() < tol) {
            fr.converged = true;
            ++fr.steps;
            break;
        }
    }
    fr.loglik = detail::log_likelihood(X * fr.beta, y);
    return fr;
}

struct StandardizedDesign {
    std::vector<double> mean, scale;
    Eigen::MatrixXd full;  // all RSM columns on standardized features
};

inline StandardizedDesign standardized_design(const std::vector<std::vector<double>>& x, int w, const std::vector<Term>& terms) {
    StandardizedDesign d;
    const std::size_t n = x.size();
    d.mean.assign(w, 0.0);
    d.scale.assign(w, 1.0);
    for (int f = 0; f < w; ++f) {
        double s = 0, ss = 0;
        for (const auto& r : x) s += r[f];
        const double m = s / static_cast<double>(n);
        for (const auto& r : x) ss += (r[f] - m) * (r[f] - m);
        const double sd = std::sqrt(ss / static_cast<double>(n));
        d.mean[f] = m;
        d.scale[f] = sd > 0 ? sd : 1.0;
    }
    d.full.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(terms.size()));
    std::vector<double> z(w);
    for (std::size_t r = 0; r < n; ++r) {
        for (int f = 0; f < w; ++f) z[f] = (x[r][f] - d.mean[f]) / d.scale[f];
        for (std::size_t k = 0; k < terms.size(); ++k) d.full(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = terms[k].eval(z.data());
    }
    return d;
}

/// Maps standardized-space coefficients onto raw-unit coefficients of the
/// full term list by expanding z = (x - m)/s.
inline std::vector<double> unstandardize(const std::vector<Term>& terms, const std::vector<double>& zcoef,
                                         const std::vector<double>& mean, const std::vector<double>& scale) {
    std::vector<double> raw(terms.size(), 0.0);
    auto index_of = [&](Term t) {
        if (t.i > t.j && t.j >= 0) std::swap(t.i, t.j);
        return static_cast<std::size_t>(std::find(terms.begin(), terms.end(), t) - terms.begin());
    };
    for (std::size_t k = 0; k < terms.size(); ++k) {
        const double c = zcoef[k];
        if (c == 0.0) continue;
        const Term& t = terms[k];
        if (t.i < 0) {
            raw[0] += c;
        } else if (t.j < 0) {
            const double s = scale[t.i], m = mean[t.i];
            raw[index_of({t.i, -1})] += c / s;
            raw[0] -= c * m / s;
        } else {
            const double si = scale[t.i], mi = mean[t.i], sj = scale[t.j], mj = mean[t.j];
            const double k2 = c / (si * sj);
            raw[index_of({t.i, t.j})] += k2;
            raw[index_of({t.i, -1})] -= k2 * mj;
            raw[index_of({t.j, -1})] -= k2 * mi;
            raw[0] += k2 * mi * mj;
        }
    }
    return raw;
}

struct AicStep {
    int removed;  // term index, -1 for the starting model
    double aic;
};

struct LogisticFit {
    RsmModel model;
    std::vector<AicStep> path;  // AIC after each accepted elimination
};

/// Full second-order logistic surface, IRLS on standardized features, then
/// backward AIC elimination (the intercept is never removed). When the
/// unpenalized fit fails to converge (separation), every fit uses ridge 1e-6.
inline LogisticFit fit_rsm_logit(const std::vector<std::vector<double>>& x, const std::vector<std::uint8_t>& y,
                                 bool stepwise = true) {
    if (x.empty()) throw std::invalid_argument("logistic fit needs data");
    std::size_t pos = 0;
    for (auto v : y) pos += v;
    if (pos == 0 || pos == y.size()) throw std::invalid_argument("degenerate labels: logistic fit needs both classes");
    const int w = static_cast<int>(x.front().size());
    LogisticFit out;
    RsmModel& m = out.model;
    m.dims = w;
    m.terms = full_rsm_terms(w);
    m.n = x.size();
    const auto d = standardized_design(x, w, m.terms);
    Eigen::VectorXd yy(static_cast<Eigen::Index>(y.size()));
    for (std::size_t r = 0; r < y.size(); ++r) yy[static_cast<Eigen::Index>(r)] = y[r];

    std::vector<std::size_t> cols(m.terms.size());
    for (std::size_t k = 0; k < cols.size(); ++k) cols[k] = k;
    auto design = [&](const std::vector<std::size_t>& c) {
        Eigen::MatrixXd X(d.full.rows(), static_cast<Eigen::Index>(c.size()));
        for (std::size_t k = 0; k < c.size(); ++k) X.col(static_cast<Eigen::Index>(k)) = d.full.col(static_cast<Eigen::Index>(c[k]));
        return X;
    };
    auto aic_of = [](const FitResult& f) { return 2.0 * static_cast<double>(f.beta.size()) - 2.0 * f.loglik; };

    FitResult cur = irls(design(cols), yy, 0.0);
    if (!cur.converged || !cur.beta.allFinite()) {
        m.ridge = true;
        cur = irls(design(cols), yy, 1e-6);
    }
    const double ridge = m.ridge ? 1e-6 : 0.0;
    double cur_aic = aic_of(cur);
    out.path.push_back({-1, cur_aic});

    while (stepwise && cols.size() > 1) {
        double best_aic = cur_aic;
        std::size_t best_pos = 0;
        FitResult best_fit;
        for (std::size_t k = 1; k < cols.size(); ++k) {
            std::vector<std::size_t> trial = cols;
            trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(k));
            Eigen::VectorXd start(static_cast<Eigen::Index>(trial.size()));
            for (std::size_t t = 0, s = 0; t < cols.size(); ++t)
                if (t != k) start[static_cast<Eigen::Index>(s++)] = cur.beta[static_cast<Eigen::Index>(t)];
            FitResult f = irls(design(trial), yy, ridge, &start);
            const double a = aic_of(f);
            if (std::isfinite(a) && a < best_aic) {
                best_aic = a;
                best_pos = k;
                best_fit = std::move(f);
            }
        }
        if (best_pos == 0) break;
        out.path.push_back({static_cast<int>(cols[best_pos]), best_aic});
        cols.erase(cols.begin() + static_cast<std::ptrdiff_t>(best_pos));
        cur = std::move(best_fit);
        cur_aic = best_aic;
    }

    std::vector<double> zcoef(m.terms.size(), 0.0);
    m.active.assign(m.terms.size(), 0);
    for (std::size_t k = 0; k < cols.size(); ++k) {
        zcoef[cols[k]] = cur.beta[static_cast<Eigen::Index>(k)];
        m.active[cols[k]] = 1;
    }
    m.coef = unstandardize(m.terms, zcoef, d.mean, d.scale);
    m.aic = cur_aic;
    return out;
}

/// Refits a model restricted to the given active term set (no selection).
inline RsmModel refit_terms(const std::vector<std::vector<double>>& x, const std::vector<std::uint8_t>& y,
                            const RsmModel& like) {
    const int w = like.dims;
    RsmModel m = like;
    m.n = x.size();
    const auto d = standardized_design(x, w, m.terms);
    std::vector<std::size_t> cols;
    for (std::size_t k = 0; k < m.terms.size(); ++k)
        if (like.active[k]) cols.push_back(k);
    Eigen::MatrixXd X(d.full.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) X.col(static_cast<Eigen::Index>(k)) = d.full.col(static_cast<Eigen::Index>(cols[k]));
    Eigen::VectorXd yy(static_cast<Eigen::Index>(y.size()));
    for (std::size_t r = 0; r < y.size(); ++r) yy[static_cast<Eigen::Index>(r)] = y[r];
    FitResult f = irls(X, yy, 0.0);
    m.ridge = false;
    if (!f.converged || !f.beta.allFinite()) {
        m.ridge = true;
        f = irls(X, yy, 1e-6);
    }
    std::vector<double> zcoef(m.terms.size(), 0.0);
    for (std::size_t k = 0; k < cols.size(); ++k) zcoef[cols[k]] = f.beta[static_cast<Eigen::Index>(k)];
    m.coef = unstandardize(m.terms, zcoef, d.mean, d.scale);
    m.aic = 2.0 * static_cast<double>(cols.size()) - 2.0 * f.loglik;
    return m;
}

}  // namespace safewcet

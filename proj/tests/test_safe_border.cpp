#include <gtest/gtest.h>

#include <cmath>

#include "safewcet/artifacts.hpp"
#include "support.hpp"

using namespace testsupport;

namespace {

RsmModel model_from(int dims, std::vector<double> coef) {
    RsmModel m;
    m.dims = dims;
    m.terms = full_rsm_terms(dims);
    m.coef = std::move(coef);
    m.active.assign(m.terms.size(), 1);
    return m;
}

std::vector<std::vector<double>> grid_points(const Box& box, int steps) {
    std::vector<std::vector<double>> pts;
    for (int i = 0; i <= steps; ++i)
        for (int j = 0; j <= steps; ++j)
            pts.push_back({box.lo[0] + (box.hi[0] - box.lo[0]) * i / steps, box.lo[1] + (box.hi[1] - box.lo[1]) * j / steps});
    return pts;
}

}  // namespace

TEST(Thresholds, NoFalseNegativeAndNoFalsePositive) {
    const std::vector<double> p = {0.1, 0.3, 0.2, 0.8, 0.25};
    const std::vector<std::uint8_t> unsafe = {0, 0, 1, 1, 0};
    const auto pu = threshold_no_false_negative(p, unsafe);
    EXPECT_FALSE(pu.degenerate);
    EXPECT_GT(pu.p_u, 0.3);
    EXPECT_EQ(pu.p_u, std::nextafter(0.3, 1.0));
    EXPECT_EQ(threshold_no_false_positive(p, unsafe), 0.2);
    const auto deg = threshold_no_false_negative({0.4, 0.2}, {0, 1});
    EXPECT_TRUE(deg.degenerate);
    EXPECT_EQ(deg.p_u, 0.9999);
    const auto high = threshold_no_false_negative({0.99995, 0.2}, {0, 1});
    EXPECT_TRUE(high.degenerate);
    EXPECT_GT(high.p_u, 0.99995);
}

TEST(BestSize, QuadraticRoots) {
    EXPECT_EQ(detail::quadratic_roots(1, -3, 2), (std::vector<double>{1, 2}));
    EXPECT_EQ(detail::quadratic_roots(0, 2, -1), (std::vector<double>{0.5}));
    EXPECT_TRUE(detail::quadratic_roots(1, 0, 1).empty());
    const auto r = detail::quadratic_roots(1e-3, 1e3, -1);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_NEAR(r[1], 1e-3, 1e-12);
}

TEST(BestSize, AxisInterceptsOfLinearModel) {
    // eta = -6 + x + 2y; p = 0.5 at x = 6 (y = 0) and y = 3 (x = 0).
    const RsmModel m = model_from(2, {-6, 1, 2, 0, 0, 0});
    const Box box{{0, 0}, {10, 10}};
    const auto c = intercept_bounds(m, box, 0.5);
    EXPECT_NEAR(c[0], 6.0, 1e-5);
    EXPECT_NEAR(c[1], 3.0, 1e-5);
    EXPECT_GE(m.predict({c[0], 0}), 0.5);
    const auto none = intercept_bounds(m, {{0, 0}, {5, 2}}, 0.5);
    EXPECT_EQ(none, (std::vector<double>{5, 2}));
}

TEST(BestSize, LinearBorderHasAnalyticOptimum) {
    // Maximize x*y on x + 2y = 6: x = 3, y = 1.5.
    const RsmModel m = model_from(2, {-6, 1, 2, 0, 0, 0});
    const auto b = best_size_point(m, 0.5, {{0, 0}, {10, 10}}, 20, 1);
    ASSERT_FALSE(b.infeasible);
    ASSERT_FALSE(b.unconstrained);
    EXPECT_NEAR(b.point[0], 3.0, 1e-3);
    EXPECT_NEAR(b.point[1], 1.5, 1e-3);
    EXPECT_NEAR(m.predict(b.point), 0.5, 1e-6);
}

TEST(BestSize, InfeasibleAndUnconstrainedCorners) {
    const RsmModel m = model_from(2, {-6, 1, 2, 0, 0, 0});
    const auto inf = best_size_point(m, 0.5, {{7, 0}, {10, 10}}, 5, 1);
    EXPECT_TRUE(inf.infeasible);
    EXPECT_EQ(inf.point, (std::vector<double>{7, 0}));
    const auto unc = best_size_point(m, 0.5, {{0, 0}, {2, 1}}, 5, 1);
    EXPECT_TRUE(unc.unconstrained);
    EXPECT_EQ(unc.point, (std::vector<double>{2, 1}));
}

TEST(BestSize, WithinOnePercentOfGridOptimumOnFittedBorders) {
    const std::vector<std::function<double(double, double)>> truths = {
        [](double x, double y) { return -6 + 1.0 * x + 1.5 * y; },
        [](double x, double y) { return -5 + 0.2 * x * x + 0.8 * y; },
        [](double x, double y) { return -8 + 0.6 * x + 0.6 * y + 0.15 * x * y; },
        [](double x, double y) { return -4 + 1.4 * x - 0.1 * x * x + 0.3 * y * y; },
    };
    const Box box{{1, 1}, {6, 6}};
    for (std::size_t k = 0; k < truths.size(); ++k) {
        SCOPED_TRACE("border " + std::to_string(k));
        Rng rng(40 + k);
        std::vector<std::vector<double>> x;
        std::vector<std::uint8_t> y;
        for (int r = 0; r < 4000; ++r) {
            const double a = uniform_real(rng, 1, 6), b = uniform_real(rng, 1, 6);
            x.push_back({a, b});
            y.push_back(uniform01(rng) < sigmoid(truths[k](a, b)));
        }
        const RsmModel m = fit_rsm_logit(x, y).model;
        std::vector<double> p;
        score_rows(m, x, p);
        const double ps = threshold_no_false_positive(p, y);
        const auto best = best_size_point(m, ps, box, 20, 9);
        if (best.infeasible || best.unconstrained) continue;
        const double got = (best.point[0] - box.lo[0]) * (best.point[1] - box.lo[1]);
        const double grid = grid_best_volume(m, logit(ps), box, 20000);
        ASSERT_GT(grid, 0);
        EXPECT_NEAR(got / grid, 1.0, 0.01) << "got " << got << " grid " << grid;
        EXPECT_NEAR(m.predict(best.point), ps, 1e-6 * std::max(ps, 1e-3));
    }
}

TEST(BestSize, BoxBelowBorderHasNoPredictedUnsafePoint) {
    const RsmModel m = model_from(2, {-8, 0.6, 0.6, 0, 0, 0.15});
    const Box box{{1, 1}, {6, 6}};
    const double ps = 0.3;
    const auto best = best_size_point(m, ps, box, 20, 2);
    const Box inner{box.lo, best.point};
    for (const auto& pt : grid_points(inner, 60)) EXPECT_LE(m.predict(pt), ps * (1 + 1e-9));
}

TEST(Sampling, CandidatesStayInsideTheReducedBoxOnGrid) {
    const SystemSpec spec = load_system(source_path("data/fixtures/two_core_mk_system.json"));
    const RsmModel m = model_from(1, {-12, 4, 0});
    const std::vector<std::size_t> feature_tasks = {3};
    const Box box{{2}, {3.4567}};
    Rng rng(1);
    const auto pts = distance_sample(spec, m, 0.5, feature_tasks, box, 200, rng);
    ASSERT_EQ(pts.size(), 200u);
    double near = 0;
    for (const auto& w : pts) {
        EXPECT_NO_THROW(validate_wcet(spec, w));
        EXPECT_GE(w[3], ms(2));
        EXPECT_LE(w[3], ms(3.456));
        EXPECT_TRUE(w[2] >= ms(2) && w[2] <= ms(3));
        near += std::abs(w[3].ms() - 3.0);
    }
    // Uniform on [2, 3.456] would average about 0.5 away from the border at 3.
    EXPECT_LT(near / 200, 0.35);
    EXPECT_EQ(floor_to_grid(3.4567, Time::from_units(1)), ms(3.456));
    EXPECT_EQ(floor_to_grid(3.0, ms(0.5)), ms(3));
}

class LearnedBorder : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        spec_ = load_system(source_path("data/fixtures/two_core_mk_system.json"));
        SearchParams p;
        p.np = 8;
        p.ns = 10;
        p.iterations = 30;
        search_ = nsga2_search(spec_, p, 4);
        data_ = search_.dataset;
        LearnConfig lc;
        lc.max_updates = 3;
        lc.samples = 50;
        lc.forest.trees = 30;
        lc.target_precision = 1.1;  // force every update to run
        border_ = learn_safe_border(spec_, data_, search_.archive, lc, 8);
    }
    static SystemSpec spec_;
    static SearchResult search_;
    static LabeledDataset data_;
    static SafeBorderModel border_;
};
SystemSpec LearnedBorder::spec_;
SearchResult LearnedBorder::search_;
LabeledDataset LearnedBorder::data_;
SafeBorderModel LearnedBorder::border_;

TEST_F(LearnedBorder, ThresholdGuaranteesHoldOnTrainingRows) {
    ASSERT_FALSE(border_.training_rows.empty());
    EXPECT_EQ(border_.training_rows.size(), border_.final_rows);
    std::size_t unsafe_below = 0, safe_above = 0;
    for (std::size_t r : border_.training_rows) {
        const double p = border_.model.predict(data_.values(r, border_.features));
        if (data_.rows[r].label == Label::unsafe && p < border_.p_s) ++unsafe_below;
        if (data_.rows[r].label == Label::safe && p >= border_.p_u) ++safe_above;
    }
    EXPECT_EQ(unsafe_below, 0u);
    EXPECT_EQ(safe_above, 0u);
    EXPECT_LE(border_.p_s, border_.p_u);
}

TEST_F(LearnedBorder, RefinementAppendsLabelledRows) {
    EXPECT_EQ(border_.updates, 3u);
    EXPECT_EQ(data_.rows.size(), search_.dataset.rows.size() + 3 * 50 * 8);
    EXPECT_EQ(border_.final_rows, border_.pruned_rows + 3 * 50 * 8);
    // Refinement rows are labelled against archive test cases.
    const auto targets = spec_.target_indices();
    std::map<std::uint64_t, const Individual*> by_id;
    for (const auto& ind : search_.archive) by_id[ind.id] = &ind;
    for (std::size_t r = search_.dataset.rows.size(); r < data_.rows.size(); r += 37) {
        const auto& row = data_.rows[r];
        ASSERT_TRUE(by_id.count(row.testcase));
        EXPECT_EQ(label(spec_, simulate(spec_, by_id[row.testcase]->tc, data_.assignment(spec_, r)), targets), row.label);
    }
}

TEST_F(LearnedBorder, FeaturesAndBoxAreConsistent) {
    ASSERT_FALSE(border_.features.empty());
    EXPECT_EQ(border_.importance.size(), data_.tasks.size());
    for (std::size_t f = 0; f < border_.features.size(); ++f) {
        EXPECT_GE(border_.reduced[f], border_.range.lo[f]);
        EXPECT_LE(border_.reduced[f], border_.range.hi[f]);
        EXPECT_GE(border_.best.point[f], border_.range.lo[f] - 1e-9);
        EXPECT_LE(border_.best.point[f], border_.reduced[f] + 1e-9);
    }
    const auto upper = border_box(spec_, data_, border_);
    ASSERT_EQ(upper.size(), data_.tasks.size());
    for (std::size_t c = 0; c < upper.size(); ++c) EXPECT_TRUE(spec_.tasks[data_.tasks[c]].wcet.contains(upper[c]));
}

TEST_F(LearnedBorder, IsDeterministicAndJobIndependent) {
    LabeledDataset d = search_.dataset;
    LearnConfig lc;
    lc.max_updates = 3;
    lc.samples = 50;
    lc.forest.trees = 30;
    lc.target_precision = 1.1;
    lc.jobs = 4;
    const auto again = learn_safe_border(spec_, d, search_.archive, lc, 8);
    EXPECT_EQ(border_to_json(spec_, d, again).dump(), border_to_json(spec_, data_, border_).dump());
}

TEST_F(LearnedBorder, JsonRoundTripPredictsTheSame) {
    const auto j = nlohmann::json::parse(border_to_json(spec_, data_, border_).dump());
    const auto back = border_from_json(spec_, j);
    EXPECT_EQ(back.feature_ids, border_.feature_ids);
    EXPECT_EQ(back.p_s, border_.p_s);
    for (std::size_t r = 0; r < data_.rows.size(); r += 101) {
        const auto x = data_.values(r, border_.features);
        EXPECT_DOUBLE_EQ(back.model.predict(x), border_.model.predict(x));
    }
    const auto upper = box_from_json(spec_, j);
    EXPECT_EQ(upper, border_box(spec_, data_, border_));
}

TEST(LearnBorder, RejectsSingleClassData) {
    const SystemSpec spec = load_system(source_path("data/fixtures/two_core_mk_system.json"));
    LabeledDataset d = LabeledDataset::for_spec(spec);
    d.append(max_wcet(spec), Label::safe, 0, 0);
    EXPECT_THROW(learn_safe_border(spec, d, {}, {}, 0), ValidationError);
}

TEST(LearnBorder, KFoldPrecisionOnCleanSeparation) {
    std::vector<std::vector<double>> x;
    std::vector<std::uint8_t> y;
    Rng rng(6);
    for (int r = 0; r < 600; ++r) {
        const double v = uniform_real(rng, 0, 10);
        x.push_back({v});
        y.push_back(uniform01(rng) < sigmoid(3 * (v - 6)));
    }
    const auto m = fit_rsm_logit(x, y).model;
    const double prec = kfold_precision(x, y, m, 5, 1);
    EXPECT_GE(prec, 0.95);
    EXPECT_LE(prec, 1.0);
    EXPECT_EQ(kfold_precision(x, y, m, 5, 1), prec);
}

TEST(BestSize, SymmetricBorderGivesSymmetricPoint) {
    const RsmModel m = model_from(2, {-9, 1, 1, 0.1, 0.1, 0.2});
    const auto b = best_size_point(m, 0.5, {{0, 0}, {10, 10}}, 20, 3);
    ASSERT_FALSE(b.infeasible);
    ASSERT_FALSE(b.unconstrained);
    EXPECT_NEAR(b.point[0], b.point[1], 1e-3);
    EXPECT_NEAR(m.predict(b.point), 0.5, 1e-6);
}

TEST_F(LearnedBorder, ZeroUpdatesKeepsTheInitialFit) {
    LabeledDataset data = search_.dataset;
    LearnConfig lc;
    lc.max_updates = 0;
    lc.forest.trees = 30;
    const auto b = learn_safe_border(spec_, data, search_.archive, lc, 8);
    EXPECT_EQ(b.updates, 0u);
    EXPECT_EQ(data.rows.size(), search_.dataset.rows.size());
    EXPECT_EQ(b.final_rows, b.pruned_rows);
}

TEST(Forest, OnlyTheCorrelatedColumnIsKept) {
    Rng rng(6);
    std::vector<std::vector<double>> x;
    std::vector<std::uint8_t> y;
    for (int r = 0; r < 2000; ++r) {
        x.push_back({uniform01(rng), uniform01(rng), uniform01(rng), uniform01(rng)});
        y.push_back(x.back()[2] > 0.5);
    }
    ForestConfig cfg;
    cfg.trees = 50;
    EXPECT_EQ(select_features(gini_importance(x, y, cfg, 1)), (std::vector<std::size_t>{2}));
    EXPECT_EQ(ceil_sqrt(25), 5u);
}

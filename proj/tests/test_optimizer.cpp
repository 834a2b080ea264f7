#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "aoi/optimizer.hpp"
#include "aoi/simulator.hpp"

using namespace aoi;

TEST(ReferenceParams, Values) {
    const auto lbop = reference_params(ReferencePolicy::lbop, 25);
    EXPECT_EQ(lbop.threshold, 55);
    EXPECT_DOUBLE_EQ(lbop.tx_prob, 0.1876);
    const auto spgp = reference_params(ReferencePolicy::spgp, 100);
    EXPECT_EQ(spgp.threshold, 217);
    EXPECT_DOUBLE_EQ(spgp.tx_prob, 0.0443);
    EXPECT_EQ(reference_params(ReferencePolicy::spgp, 25).threshold, 54);
    EXPECT_EQ(reference_params(ReferencePolicy::lbop, 50).threshold, 110);
    // 2.2 * 5 = 11 and 2.17 * 50 = 108.5 round half-up.
    EXPECT_EQ(reference_params(ReferencePolicy::lbop, 5).threshold, 11);
    EXPECT_EQ(reference_params(ReferencePolicy::spgp, 50).threshold, 109);
}

TEST(ReferenceParams, ProbabilityAboveOne) {
    EXPECT_THROW(reference_params(ReferencePolicy::lbop, 4), ParameterError);
    EXPECT_NO_THROW(reference_params(ReferencePolicy::lbop, 5));
    EXPECT_THROW(reference_params(ReferencePolicy::spgp, 0), ParameterError);
}

TEST(GridSpec, PValuesAreDecimal) {
    auto g = GridSpec::defaults(25);
    EXPECT_EQ(g.h_max, 75);
    const auto ps = g.p_values();
    ASSERT_EQ(ps.size(), 1000u);
    EXPECT_EQ(ps.front(), 0.001);
    EXPECT_EQ(ps[186], 0.187);
    EXPECT_EQ(ps.back(), 1.0);
    g.p_step = 0.05;
    g.p_min = 0.05;
    EXPECT_EQ(g.p_values().size(), 20u);
    g.h_max = 0;
    EXPECT_THROW(g.validate(), ParameterError);
}

TEST(Optimize, CoarseGridBestIsSurfaceArgmin) {
    GridSpec g;
    g.h_max = 6;
    g.p_step = g.p_min = 0.05;
    AnalysisSettings s;
    const auto r = optimize_age_threshold(2, g, s);
    EXPECT_LE(r.surface.size() + r.skipped.size(), 120u);
    EXPECT_EQ(r.surface.size() + r.skipped.size(), 120u);
    const auto best = std::min_element(
        r.surface.begin(), r.surface.end(), [](const auto& a, const auto& b) {
            if (a.converged != b.converged) return a.converged;
            return a.aoi_approx < b.aoi_approx;
        });
    EXPECT_EQ(best->params.threshold, r.best_params.threshold);
    EXPECT_EQ(best->params.tx_prob, r.best_params.tx_prob);
    EXPECT_EQ(best->aoi_approx, r.best_solution.aoi_approx);
    // p = 1 with two users never delivers.
    for (const auto& sk : r.skipped) EXPECT_EQ(sk.params.tx_prob, 1.0);
}

TEST(Optimize, SingleUserRejected) {
    EXPECT_THROW(optimize_age_threshold(1, GridSpec::defaults(1), {}), ParameterError);
}

TEST(Optimize, ParallelMatchesSerial) {
    GridSpec g;
    g.h_max = 30;
    g.p_step = g.p_min = 0.01;
    SearchOptions serial, parallel;
    parallel.threads = 4;
    const auto a = optimize_age_threshold(10, g, {}, PauseOn::success, serial);
    const auto b = optimize_age_threshold(10, g, {}, PauseOn::success, parallel);
    ASSERT_EQ(a.surface.size(), b.surface.size());
    for (std::size_t i = 0; i < a.surface.size(); ++i) {
        EXPECT_EQ(a.surface[i].params.threshold, b.surface[i].params.threshold);
        EXPECT_EQ(a.surface[i].params.tx_prob, b.surface[i].params.tx_prob);
        EXPECT_EQ(a.surface[i].aoi_approx, b.surface[i].aoi_approx);
    }
    EXPECT_EQ(a.best_params.threshold, b.best_params.threshold);
}

TEST(Optimize, ProgressIsReported) {
    GridSpec g;
    g.h_max = 5;
    g.p_step = g.p_min = 0.01;
    SearchOptions o;
    std::size_t last = 0, calls = 0;
    o.progress_every = 100;
    o.progress = [&](std::size_t done, std::size_t total) {
        EXPECT_EQ(total, 500u);
        last = done;
        ++calls;
    };
    optimize_age_threshold(5, g, {}, PauseOn::success, o);
    EXPECT_EQ(last, 500u);
    EXPECT_EQ(calls, 5u);
}

TEST(GridSearch, TiesGoToFirstCandidate) {
    const std::vector<int> candidates{3, 1, 2};
    AnalysisSettings s;
    s.num_users = 3;
    const auto r = grid_search(candidates, [](int) { return build_pure_aloha(0.3); }, s);
    EXPECT_EQ(r.best_params, 3);
}

TEST(GridSearch, AllDegenerateIsEmptyResult) {
    const std::vector<int> candidates{1, 2};
    AnalysisSettings s;
    s.num_users = 2;
    EXPECT_THROW(grid_search(candidates, [](int) { return build_pure_aloha(1.0); }, s),
                 EmptyResultError);
}

TEST(Optimize, DefaultGridBeatsReferencePointsAtN25) {
    AnalysisSettings s;
    const auto r = optimize_age_threshold(25, GridSpec::defaults(25), s);
    s.num_users = 25;
    for (auto kind : {ReferencePolicy::lbop, ReferencePolicy::spgp}) {
        const auto params = reference_params(kind, 25);
        const auto ref = analyze(build_age_threshold_aloha(params), s);
        EXPECT_LE(r.best_solution.aoi_approx, ref.aoi_approx) << to_string(kind);
        // Both points lie on the grid, so the surface holds the same value.
        const auto it = std::find_if(r.surface.begin(), r.surface.end(), [&](const auto& rec) {
            return rec.params.threshold == params.threshold &&
                   std::abs(rec.params.tx_prob - params.tx_prob) < 1e-12;
        });
        if (it != r.surface.end()) {
            EXPECT_NEAR(it->aoi_approx, ref.aoi_approx, 1e-9 * ref.aoi_approx);
        }
    }
    EXPECT_EQ(r.best_params.threshold, 53);
    EXPECT_EQ(r.best_params.tx_prob, 0.17);
}

TEST(Optimize, SomaSimulatesBelowLbopAtN10) {
    const auto r = optimize_age_threshold(10, GridSpec::defaults(10), {});
    SimConfig c;
    c.num_users = 10;
    c.num_runs = 10;
    c.horizon = 20'000;
    c.seed = 3;
    const auto soma = simulate(build_age_threshold_aloha(r.best_params), c);
    const auto lbop =
        simulate(build_age_threshold_aloha(reference_params(ReferencePolicy::lbop, 10)), c);
    EXPECT_LE(soma.mean_aoi, lbop.mean_aoi);
}

TEST(SweepEpsilon, MeasuredArgminAtN25) {
    AnalysisSettings s;
    const auto pts = sweep_epsilon(25, 55, 3.0, 6.0, 0.05, s);
    ASSERT_EQ(pts.size(), 61u);
    EXPECT_EQ(pts.front().epsilon, 3.0);
    EXPECT_EQ(pts.back().epsilon, 6.0);
    const auto best = std::min_element(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        return a.solution->aoi_approx < b.solution->aoi_approx;
    });
    // Measured; the large-N window [4.43, 4.69] is not reached at N = 25.
    EXPECT_DOUBLE_EQ(best->epsilon, 4.3);
}

TEST(SweepEpsilon, ProbabilityOneIsEvaluated) {
    AnalysisSettings s;
    const auto solo = sweep_epsilon(1, 3, 0.5, 1.0, 0.5, s);
    ASSERT_EQ(solo.size(), 2u);
    EXPECT_EQ(solo.back().tx_prob, 1.0);
    ASSERT_TRUE(solo.back().solution.has_value()) << solo.back().failure;
    // Transmit, pause 3 slots, repeat: one delivery every 4 slots.
    EXPECT_NEAR(solo.back().solution->mean_rate, 0.25, 1e-15);

    // With five users p = 1 collides forever; the point is kept with its reason.
    const auto pts = sweep_epsilon(5, 3, 4.0, 5.0, 0.5, s);
    ASSERT_EQ(pts.size(), 3u);
    EXPECT_EQ(pts.back().tx_prob, 1.0);
    EXPECT_FALSE(pts.back().solution.has_value());
    EXPECT_NE(pts.back().failure.find("delivery rate"), std::string::npos) << pts.back().failure;
}

TEST(SweepEpsilon, BadRange) {
    EXPECT_THROW(sweep_epsilon(5, 3, 4.0, 3.0, 0.5, {}), ParameterError);
    EXPECT_THROW(sweep_epsilon(5, 3, 3.0, 4.0, 0.0, {}), ParameterError);
}

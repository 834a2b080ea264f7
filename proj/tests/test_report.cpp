#include <gtest/gtest.h>

#include "aoi/report.hpp"

using namespace aoi;

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(1.0), "1");
    EXPECT_EQ(format_double(0.1876), "0.1876");
    EXPECT_EQ(format_double(4.69 / 25), "0.18760000000000002");
    EXPECT_EQ(format_double(1.0 / 3.0), "0.3333333333333333");
    EXPECT_EQ(format_double(1e-300), "1e-300");
    for (double x : {0.012106, 82.60310740830022, 2.0 / 9.0, 1e-17})
        EXPECT_EQ(std::stod(format_double(x)), x);
}

TEST(Csv, SurfaceLayout) {
    GridSearchResult<AgeThresholdParams> r;
    r.surface.push_back({{1, 0.05}, 0.25, 0.1875, 2.5, true});
    r.surface.push_back({{2, 0.1}, 0.125, 0.0625, 4.5, false});
    r.skipped.push_back({{2, 1.0}, "temporal variance: rate, zero"});
    EXPECT_EQ(surface_csv(r),
              "H,p,m,v2,aoi_approx,converged\n"
              "1,0.05,0.25,0.1875,2.5,true\n"
              "2,0.1,0.125,0.0625,4.5,false\n");
    EXPECT_EQ(skipped_csv(r), "H,p,reason\n2,1,\"temporal variance: rate, zero\"\n");
}

TEST(Csv, RunsLayout) {
    SimResult s;
    RunResult a;
    a.run = 0;
    a.mean_aoi = 12.5;
    a.empirical_rate = 0.0625;
    a.empirical_variance = 0.05;
    RunResult b = a;
    b.run = 1;
    b.empirical_variance.reset();
    s.runs = {a, b};
    EXPECT_EQ(runs_csv(s),
              "run,mean_aoi,empirical_rate,empirical_variance\n"
              "0,12.5,0.0625,0.05\n"
              "1,12.5,0.0625,\n");
}

TEST(Csv, ComparisonLayout) {
    SimResult s;
    s.mean_aoi = 70.25;
    s.aoi_p025 = 60.5;
    s.aoi_p975 = 80.75;
    std::vector<ComparisonRow> rows{{"SOMA", 10, s, ""}, {"LBOP", 4, std::nullopt, "p > 1"}};
    EXPECT_EQ(comparison_csv(rows),
              "label,N,mean_aoi,p2.5,p97.5\n"
              "SOMA,10,70.25,60.5,80.75\n"
              "LBOP,4,,,\n");
}

TEST(Csv, EpsilonLayout) {
    MeanFieldSolution sol;
    sol.aoi_approx = 70.5;
    sol.mean_rate = 0.01;
    sol.temporal_variance = 0.002;
    sol.converged = true;
    std::vector<EpsilonPoint> pts{{4.4, 0.088, sol, ""}, {4.45, 0.089, std::nullopt, "x"}};
    EXPECT_EQ(epsilon_csv(pts),
              "eps,aoi_approx,p,m,v2,converged\n"
              "4.4,70.5,0.088,0.01,0.002,true\n"
              "4.45,,0.089,,,\n");
}

TEST(Json, SolutionFields) {
    MeanFieldSolution sol;
    sol.mu = {0.25, 0.75};
    sol.mean_rate = 0.125;
    sol.converged = true;
    const auto j = to_json(sol);
    for (const char* key : {"mu", "gamma0", "gamma1", "mean_rate", "temporal_variance",
                            "temporal_variance_unclamped", "aoi_approx", "iterations", "residual",
                            "converged", "covariance_terms", "damping"})
        EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_EQ(j["mean_rate"].get<double>(), 0.125);
}

TEST(Json, SettingsOverride) {
    AnalysisSettings s;
    apply_settings_json(nlohmann::json::parse(R"({"fp_threshold": 1e-8, "cov_k_max": 4000})"), s);
    EXPECT_EQ(s.fp_threshold, 1e-8);
    EXPECT_EQ(s.cov_k_max, 4000);
    EXPECT_EQ(s.fp_max_iters, 10000);
    EXPECT_THROW(apply_settings_json(nlohmann::json::parse(R"({"tolerance": 1})"), s), ParseError);
    EXPECT_THROW(apply_settings_json(nlohmann::json::parse(R"({"cov_k_max": "many"})"), s),
                 ParseError);
    EXPECT_THROW(apply_settings_json(nlohmann::json::parse("[1]"), s), ParseError);
}

TEST(Json, ManifestFields) {
    RunManifest m;
    m.command = "simulate";
    m.argv = {"simulate", "--N", "3"};
    m.seed = 7;
    m.outputs = {"out/simulate_runs.csv"};
    const auto j = m.to_json();
    EXPECT_EQ(j["schema"], kManifestSchema);
    EXPECT_EQ(j["version"], kToolVersion);
    EXPECT_EQ(j["seed"], 7);
    EXPECT_EQ(j["argv"].size(), 3u);
    EXPECT_EQ(j["csv_schema_version"], kCsvSchemaVersion);
    EXPECT_EQ(m.file_name(), "simulate.manifest.json");
    m.seed.reset();
    EXPECT_TRUE(m.to_json()["seed"].is_null());
}

TEST(Svg, ProducesDocument) {
    const auto svg = svg_line_chart({{"a", {1, 2, 3}, {3, 1, 2}}}, "t", "x", "y");
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("<polyline"), std::string::npos);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

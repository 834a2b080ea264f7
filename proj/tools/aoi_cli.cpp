// aoi: command-line front end for the mean-field AoI analysis, the grid
// optimizer and the slot-level simulator.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aoi/aoi.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFullRuns = 100;
constexpr long kFullHorizon = 100'000;
constexpr int kDeskRuns = 20;
constexpr long kDeskHorizon = 20'000;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProtocolOptions {
    std::string spec_path;
    std::string family;
    std::optional<int> threshold;
    std::optional<double> tx_prob;
    std::string pause_on = "success";

    void add_to(CLI::App& cmd) {
        cmd.add_option("--spec", spec_path, "Protocol-spec JSON file");
        cmd.add_option("--family", family, "Built-in family instead of --spec")
            ->check(CLI::IsMember({"age-threshold", "pure-aloha"}));
        cmd.add_option("--H", threshold, "Age threshold (age-threshold family)");
        cmd.add_option("--p", tx_prob, "Transmission probability");
        cmd.add_option("--pause-on", pause_on, "Which outcome starts the pause countdown")
            ->check(CLI::IsMember({"success", "collision"}));
    }

    aoi::ProtocolSpec resolve() const {
        if (!spec_path.empty() && !family.empty())
            throw UsageError("give either --spec or --family, not both");
        if (!spec_path.empty()) return aoi::read_spec(spec_path);
        if (family.empty()) throw UsageError("one of --spec or --family is required");
        if (!tx_prob) throw UsageError("--family needs --p");
        if (family == "pure-aloha") return aoi::build_pure_aloha(*tx_prob);
        if (!threshold) throw UsageError("--family age-threshold needs --H");
        return aoi::build_age_threshold_aloha({*threshold, *tx_prob},
                                              aoi::parse_pause_on(pause_on));
    }

    json describe() const {
        json j;
        if (!spec_path.empty()) {
            j["spec"] = spec_path;
        } else {
            j["family"] = family;
            if (threshold) j["H"] = *threshold;
            if (tx_prob) j["p"] = *tx_prob;
            if (family == "age-threshold") j["pause_on"] = pause_on;
        }
        return j;
    }
};

struct SettingsOptions {
    std::string file;
    std::optional<double> fp_threshold, damping, cov_term_tol, stat_dist_tol;
    std::optional<int> fp_max_iters, cov_k_max;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--settings", file, "JSON file overriding analysis settings");
        cmd.add_option("--fp-threshold", fp_threshold, "Fixed-point L1 threshold");
        cmd.add_option("--fp-max-iters", fp_max_iters, "Fixed-point iteration cap");
        cmd.add_option("--damping", damping, "Fixed-point damping in [0, 1)");
        cmd.add_option("--cov-k-max", cov_k_max, "Largest covariance lag");
        cmd.add_option("--cov-term-tol", cov_term_tol, "Covariance early-stop tolerance");
        cmd.add_option("--stat-dist-tol", stat_dist_tol, "Stationary-solve tolerance");
    }

    aoi::AnalysisSettings resolve(int num_users) const {
        aoi::AnalysisSettings s;
        if (!file.empty()) {
            json j;
            try {
                j = json::parse(aoi::read_text(file));
            } catch (const json::parse_error& e) {
                throw aoi::ParseError(file + ": " + e.what());
            }
            aoi::apply_settings_json(j, s);
        }
        if (fp_threshold) s.fp_threshold = *fp_threshold;
        if (fp_max_iters) s.fp_max_iters = *fp_max_iters;
        if (damping) s.damping = *damping;
        if (cov_k_max) s.cov_k_max = *cov_k_max;
        if (cov_term_tol) s.cov_term_tol = *cov_term_tol;
        if (stat_dist_tol) s.stat_dist_tol = *stat_dist_tol;
        s.num_users = num_users;
        s.validate();
        return s;
    }
};

struct RunScale {
    std::optional<int> runs;
    std::optional<long> horizon;
    bool paper_scale = false;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--runs", runs, "Independent runs (default 20)");
        cmd.add_option("--horizon", horizon, "Slots per run (default 20000)");
        cmd.add_flag("--paper-scale", paper_scale, "Use 100 runs of 100000 slots");
    }

    void apply(aoi::SimConfig& c) const {
        c.num_runs = paper_scale ? kFullRuns : kDeskRuns;
        c.horizon = paper_scale ? kFullHorizon : kDeskHorizon;
        if (runs) c.num_runs = *runs;
        if (horizon) c.horizon = *horizon;
    }
};

/// Collects outputs and writes the manifest last, so a manifest exists
/// only for commands that finished.
class OutputDir {
public:
    OutputDir(const std::string& dir, const std::string& command, std::vector<std::string> argv)
        : dir_(dir) {
        manifest_.command = command;
        manifest_.argv = std::move(argv);
        manifest_.started_utc = aoi::utc_timestamp();
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw aoi::IoError("cannot create output directory '" + dir + "': " + ec.message());
    }

    aoi::RunManifest& manifest() { return manifest_; }

    fs::path write(const std::string& name, const std::string& text) {
        const fs::path path = dir_ / name;
        aoi::write_text(path, text);
        manifest_.outputs.push_back(path.string());
        return path;
    }

    fs::path write_json(const std::string& name, json j) {
        j["manifest"] = manifest_.file_name();
        return write(name, j.dump(2) + "\n");
    }

    void finish() {
        manifest_.finished_utc = aoi::utc_timestamp();
        aoi::write_text(dir_ / manifest_.file_name(), manifest_.to_json().dump(2) + "\n");
    }

private:
    fs::path dir_;
    aoi::RunManifest manifest_;
};

unsigned resolve_threads(unsigned requested) {
    return requested == 0 ? aoi::hardware_threads() : requested;
}

std::vector<int> parse_n_list(const std::string& text) {
    std::vector<int> list;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        int n = 0;
        try {
            n = std::stoi(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw UsageError("--N-list entry '" + item + "' is not an integer");
        if (n < 1) throw aoi::ParameterError("every N in --N-list must be >= 1");
        list.push_back(n);
    }
    if (list.empty()) throw UsageError("--N-list must name at least one N");
    return list;
}

struct EpsRange {
    double lo = 3.0, hi = 6.0, step = 0.05;
};

EpsRange parse_eps(const std::string& text) {
    EpsRange r;
    char c1 = 0, c2 = 0;
    std::istringstream in(text);
    if (!(in >> r.lo >> c1 >> r.hi >> c2 >> r.step) || c1 != ':' || c2 != ':' || !in.eof())
        throw UsageError("--eps must look like lo:hi:step, got '" + text + "'");
    return r;
}

void print_solution(const aoi::MeanFieldSolution& s) {
    std::cout << "m          = " << aoi::format_double(s.mean_rate) << '\n'
              << "v2         = " << aoi::format_double(s.temporal_variance) << '\n'
              << "aoi_approx = " << aoi::format_double(s.aoi_approx) << '\n'
              << "iterations = " << s.iterations << '\n'
              << "residual   = " << aoi::format_double(s.residual) << '\n'
              << "converged  = " << (s.converged ? "true" : "false") << '\n';
    if (s.damping != 0.0) std::cout << "damping    = " << aoi::format_double(s.damping) << '\n';
}

json soma_entry(int n, const aoi::AgeThresholdParams& p, double aoi_approx) {
    return {{"N", n}, {"H", p.threshold}, {"p", p.tx_prob}, {"aoi_approx", aoi_approx}};
}

std::map<int, aoi::AgeThresholdParams> load_soma_cache(const std::string& path) {
    std::map<int, aoi::AgeThresholdParams> out;
    if (path.empty() || !fs::exists(path)) return out;
    try {
        const json j = json::parse(aoi::read_text(path));
        for (const auto& e : j.at("entries"))
            out[e.at("N").get<int>()] = {e.at("H").get<int>(), e.at("p").get<double>()};
    } catch (const json::exception& e) {
        throw aoi::ParseError(path + ": " + e.what());
    }
    return out;
}

int run_cli(std::vector<std::string> args);

int dispatch(std::vector<std::string> args) {
    CLI::App app{"Age-of-Information analysis, optimization and simulation for slotted CSMA", "aoi"};
    app.set_version_flag("--version", std::string(aoi::kToolVersion));
    app.require_subcommand(1);

    std::string out_dir = "out";
    unsigned threads = 1;
    bool quiet = false;
    auto common = [&](CLI::App& cmd) {
        cmd.add_option("--out-dir", out_dir, "Directory for outputs and the manifest");
        cmd.add_option("--threads", threads, "Worker threads (0 = all cores)");
        cmd.add_flag("--quiet", quiet, "Suppress progress output");
    };

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Mean-field AoI estimate for one protocol");
    ProtocolOptions an_proto;
    SettingsOptions an_settings;
    int an_n = 1;
    an_proto.add_to(*analyze);
    an_settings.add_to(*analyze);
    analyze->add_option("--N", an_n, "Number of users")->required();
    common(*analyze);

    // make-spec
    auto* make_spec = app.add_subcommand("make-spec", "Write a built-in protocol as a spec file");
    ProtocolOptions ms_proto;
    std::string ms_out;
    ms_proto.add_to(*make_spec);
    make_spec->add_option("--out", ms_out, "Destination JSON file")->required();

    // optimize
    auto* optimize = app.add_subcommand("optimize", "Grid search over age-threshold (H, p)");
    SettingsOptions op_settings;
    int op_n = 0;
    std::optional<int> op_h_min, op_h_max;
    double op_p_step = 0.001;
    std::optional<double> op_p_min;
    double op_p_max = 1.0;
    std::string op_pause_on = "success";
    op_settings.add_to(*optimize);
    optimize->add_option("--N", op_n, "Number of users (>= 2)")->required();
    optimize->add_option("--h-min", op_h_min, "Smallest H (default 1)");
    optimize->add_option("--h-max", op_h_max, "Largest H (default 3N)");
    optimize->add_option("--p-step", op_p_step, "Grid spacing of p");
    optimize->add_option("--p-min", op_p_min, "Smallest p (default p-step)");
    optimize->add_option("--p-max", op_p_max, "Largest p");
    optimize->add_option("--pause-on", op_pause_on)->check(CLI::IsMember({"success", "collision"}));
    common(*optimize);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Seeded slot-level Monte Carlo simulation");
    ProtocolOptions sim_proto;
    RunScale sim_scale;
    int sim_n = 1;
    std::uint64_t sim_seed = 1;
    int sim_batches = 100;
    sim_proto.add_to(*simulate);
    sim_scale.add_to(*simulate);
    simulate->add_option("--N", sim_n, "Number of users")->required();
    simulate->add_option("--seed", sim_seed, "Base seed");
    simulate->add_option("--batches", sim_batches, "Batches for the variance estimator");
    common(*simulate);

    // compare
    auto* compare = app.add_subcommand("compare", "Simulate SOMA, LBOP and SPGP side by side");
    std::string cmp_ns;
    RunScale cmp_scale;
    SettingsOptions cmp_settings;
    std::uint64_t cmp_seed = 1;
    std::string cmp_cache;
    std::string cmp_pause_on = "success";
    bool cmp_svg = false;
    compare->add_option("--N-list", cmp_ns, "Comma-separated user counts")->required();
    cmp_scale.add_to(*compare);
    cmp_settings.add_to(*compare);
    compare->add_option("--seed", cmp_seed, "Base seed shared by every cell");
    compare->add_option("--soma-cache", cmp_cache, "Best-params JSON to reuse instead of optimizing");
    compare->add_option("--pause-on", cmp_pause_on)->check(CLI::IsMember({"success", "collision"}));
    compare->add_flag("--svg", cmp_svg, "Also write compare.svg");
    common(*compare);

    // sweep-eps
    auto* sweep = app.add_subcommand("sweep-eps", "AoI estimate along p = eps / N at fixed H");
    int sw_n = 0;
    std::optional<int> sw_h;
    std::string sw_eps = "3.0:6.0:0.05";
    std::string sw_pause_on = "success";
    SettingsOptions sw_settings;
    bool sw_svg = false;
    sweep->add_option("--N", sw_n, "Number of users")->required();
    sweep->add_option("--H", sw_h, "Age threshold (default round(2.2 N))");
    sweep->add_option("--eps", sw_eps, "Range lo:hi:step");
    sweep->add_option("--pause-on", sw_pause_on)->check(CLI::IsMember({"success", "collision"}));
    sw_settings.add_to(*sweep);
    sweep->add_flag("--svg", sw_svg, "Also write sweep_eps.svg");
    common(*sweep);

    // bench
    auto* bench = app.add_subcommand("bench", "Runtime of analysis against simulation");
    std::string b_ns;
    RunScale b_scale;
    SettingsOptions b_settings;
    std::uint64_t b_seed = 1;
    std::string b_policy = "lbop";
    bench->add_option("--N-list", b_ns, "Comma-separated user counts")->required();
    b_scale.add_to(*bench);
    b_settings.add_to(*bench);
    bench->add_option("--seed", b_seed, "Base seed");
    bench->add_option("--policy", b_policy, "Reference point to time")
        ->check(CLI::IsMember({"lbop", "spgp"}));
    common(*bench);

    // rerun
    auto* rerun = app.add_subcommand("rerun", "Repeat a command from its manifest");
    std::string rr_manifest;
    std::optional<std::string> rr_out;
    std::optional<unsigned> rr_threads;
    rerun->add_option("--manifest", rr_manifest, "Manifest JSON")->required();
    rerun->add_option("--out-dir", rr_out, "Write outputs here instead");
    rerun->add_option("--threads", rr_threads, "Override the thread count");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    threads = resolve_threads(threads);
    auto progress = [&](const char* what) {
        return [what, &quiet](std::size_t done, std::size_t total) {
            if (!quiet) std::cerr << what << ": " << done << "/" << total << " points\n";
        };
    };

    if (*analyze) {
        const auto spec = an_proto.resolve();
        const auto settings = an_settings.resolve(an_n);
        OutputDir out(out_dir, "analyze", args);
        const auto sol = settings.damping == 0.0 ? aoi::analyze_with_retry(spec, settings)
                                                 : aoi::analyze(spec, settings);
        print_solution(sol);
        json j;
        j["schema"] = aoi::kSolutionSchema;
        j["num_users"] = an_n;
        j["protocol"] = an_proto.describe();
        j["settings"] = aoi::to_json(settings);
        j["solution"] = aoi::to_json(sol);
        out.write_json("analyze.json", j);
        out.manifest().parameters = {{"protocol", an_proto.describe()},
                                     {"spec", aoi::to_json(spec)},
                                     {"settings", aoi::to_json(settings)}};
        out.finish();
        return 0;
    }

    if (*make_spec) {
        const auto spec = ms_proto.resolve();
        aoi::write_spec(spec, ms_out);
        std::cout << "wrote " << ms_out << '\n';
        return 0;
    }

    if (*optimize) {
        auto settings = op_settings.resolve(op_n < 1 ? 1 : op_n);
        if (op_n < 2) throw aoi::ParameterError("optimize requires N >= 2");
        auto grid = aoi::GridSpec::defaults(op_n);
        if (op_h_min) grid.h_min = *op_h_min;
        if (op_h_max) grid.h_max = *op_h_max;
        grid.p_step = op_p_step;
        grid.p_min = op_p_min ? *op_p_min : op_p_step;
        grid.p_max = op_p_max;
        grid.validate();
        const auto pause_on = aoi::parse_pause_on(op_pause_on);

        OutputDir out(out_dir, "optimize", args);
        aoi::SearchOptions opts;
        opts.threads = threads;
        opts.progress = progress("optimize");
        opts.progress_every = std::max<std::size_t>(1000, grid.size() / 20);
        const auto result = aoi::optimize_age_threshold(op_n, grid, settings, pause_on, opts);

        std::size_t unconverged = 0;
        for (const auto& r : result.surface) unconverged += !r.converged;
        std::cout << "best H = " << result.best_params.threshold
                  << ", p = " << aoi::format_double(result.best_params.tx_prob)
                  << ", aoi_approx = " << aoi::format_double(result.best_solution.aoi_approx)
                  << '\n'
                  << "grid points: " << result.surface.size() << " evaluated, "
                  << result.skipped.size() << " skipped, " << unconverged << " not converged\n";

        out.write("optimize_surface.csv", aoi::surface_csv(result));
        out.write("optimize_skipped.csv", aoi::skipped_csv(result));
        json best;
        best["schema"] = "aoi-best/1";
        best["pause_on"] = op_pause_on;
        best["entries"] = json::array({soma_entry(op_n, result.best_params,
                                                  result.best_solution.aoi_approx)});
        best["solution"] = aoi::to_json(result.best_solution);
        out.write_json("optimize_best.json", best);
        const auto best_spec = aoi::build_age_threshold_aloha(result.best_params, pause_on);
        out.write("optimize_best_spec.json", aoi::to_json(best_spec).dump(2) + "\n");
        out.manifest().parameters = {
            {"N", op_n},
            {"grid",
             {{"h_min", grid.h_min}, {"h_max", grid.h_max}, {"p_min", grid.p_min},
              {"p_max", grid.p_max}, {"p_step", grid.p_step}}},
            {"pause_on", op_pause_on},
            {"settings", aoi::to_json(settings)}};
        out.finish();
        return 0;
    }

    if (*simulate) {
        const auto spec = sim_proto.resolve();
        aoi::SimConfig config;
        config.num_users = sim_n;
        config.seed = sim_seed;
        config.threads = threads;
        config.batches = sim_batches;
        sim_scale.apply(config);
        config.validate();

        OutputDir out(out_dir, "simulate", args);
        const auto result = aoi::simulate(spec, config);
        std::cout << "mean AoI   = " << aoi::format_double(result.mean_aoi) << " [2.5%: "
                  << aoi::format_double(result.aoi_p025)
                  << ", 97.5%: " << aoi::format_double(result.aoi_p975) << "]\n"
                  << "mean rate  = " << aoi::format_double(result.mean_rate) << '\n';
        if (result.mean_variance)
            std::cout << "variance   = " << aoi::format_double(*result.mean_variance) << '\n';

        out.write("simulate_runs.csv", aoi::runs_csv(result));
        json summary;
        summary["schema"] = "aoi-simulation/1";
        summary["mean_aoi"] = result.mean_aoi;
        summary["aoi_p025"] = result.aoi_p025;
        summary["aoi_p975"] = result.aoi_p975;
        summary["mean_rate"] = result.mean_rate;
        summary["mean_variance"] =
            result.mean_variance ? json(*result.mean_variance) : json(nullptr);
        out.write_json("simulate_summary.json", summary);
        out.manifest().parameters = {{"protocol", sim_proto.describe()},
                                     {"spec", aoi::to_json(spec)},
                                     {"simulation", aoi::to_json(config)}};
        out.manifest().seed = sim_seed;
        out.finish();
        return 0;
    }

    if (*compare) {
        const auto ns = parse_n_list(cmp_ns);
        const auto pause_on = aoi::parse_pause_on(cmp_pause_on);
        aoi::SimConfig config;
        config.seed = cmp_seed;
        config.threads = threads;
        cmp_scale.apply(config);
        config.validate();

        OutputDir out(out_dir, "compare", args);
        auto cache = load_soma_cache(cmp_cache);
        json soma = json::array();
        std::vector<aoi::PolicyCell> cells;
        std::vector<aoi::ComparisonRow> rejected;  // reference points outside p <= 1
        std::vector<std::size_t> order;            // row slot -> cell index or rejected index
        std::vector<bool> is_cell;
        for (int n : ns) {
            aoi::AgeThresholdParams best;
            double best_aoi = std::nan("");
            if (auto it = cache.find(n); it != cache.end()) {
                best = it->second;
            } else {
                if (!quiet) std::cerr << "compare: optimizing SOMA parameters for N = " << n << '\n';
                aoi::SearchOptions opts;
                opts.threads = threads;
                const auto r = aoi::optimize_age_threshold(
                    n, aoi::GridSpec::defaults(n), cmp_settings.resolve(n), pause_on, opts);
                best = r.best_params;
                best_aoi = r.best_solution.aoi_approx;
            }
            soma.push_back(soma_entry(n, best, best_aoi));
            order.push_back(cells.size());
            is_cell.push_back(true);
            cells.push_back({"SOMA", n, aoi::build_age_threshold_aloha(best, pause_on)});
            for (auto kind : {aoi::ReferencePolicy::lbop, aoi::ReferencePolicy::spgp}) {
                try {
                    auto spec = aoi::build_age_threshold_aloha(aoi::reference_params(kind, n), pause_on);
                    order.push_back(cells.size());
                    is_cell.push_back(true);
                    cells.push_back({aoi::to_string(kind), n, std::move(spec)});
                } catch (const aoi::Error& e) {
                    order.push_back(rejected.size());
                    is_cell.push_back(false);
                    rejected.push_back({aoi::to_string(kind), n, std::nullopt, e.describe()});
                }
            }
        }
        const auto simulated = aoi::compare_policies(cells, config);
        std::vector<aoi::ComparisonRow> rows;
        for (std::size_t i = 0; i < order.size(); ++i)
            rows.push_back(is_cell[i] ? simulated[order[i]] : rejected[order[i]]);
        for (const auto& row : rows) {
            if (row.result)
                std::cout << row.label << " N=" << row.num_users
                          << " mean AoI = " << aoi::format_double(row.result->mean_aoi) << '\n';
            else
                std::cout << row.label << " N=" << row.num_users << " failed: " << row.failure
                          << '\n';
        }
        out.write("compare.csv", aoi::comparison_csv(rows));
        json soma_doc;
        soma_doc["schema"] = "aoi-best/1";
        soma_doc["pause_on"] = cmp_pause_on;
        soma_doc["entries"] = soma;
        out.write_json("compare_soma.json", soma_doc);
        if (cmp_svg) {
            std::vector<aoi::SvgSeries> series;
            for (const char* label : {"SOMA", "LBOP", "SPGP"}) {
                aoi::SvgSeries s{label, {}, {}};
                for (const auto& row : rows)
                    if (row.label == label && row.result) {
                        s.x.push_back(row.num_users);
                        s.y.push_back(row.result->mean_aoi);
                    }
                series.push_back(std::move(s));
            }
            out.write("compare.svg",
                      aoi::svg_line_chart(series, "Simulated mean AoI", "N", "mean AoI"));
        }
        out.manifest().parameters = {{"N_list", ns},
                                     {"pause_on", cmp_pause_on},
                                     {"soma_cache", cmp_cache},
                                     {"soma", soma},
                                     {"simulation", aoi::to_json(config)}};
        out.manifest().seed = cmp_seed;
        out.finish();
        return 0;
    }

    if (*sweep) {
        if (sw_n < 1) throw aoi::ParameterError("sweep-eps requires N >= 1");
        const int h = sw_h ? *sw_h : static_cast<int>((220L * sw_n + 50) / 100);
        const auto range = parse_eps(sw_eps);
        const auto settings = sw_settings.resolve(sw_n);
        OutputDir out(out_dir, "sweep-eps", args);
        const auto pts = aoi::sweep_epsilon(sw_n, h, range.lo, range.hi, range.step, settings,
                                            aoi::parse_pause_on(sw_pause_on), threads);
        const aoi::EpsilonPoint* best = nullptr;
        for (const auto& pt : pts) {
            if (!pt.solution || !pt.solution->converged) continue;
            if (!best || pt.solution->aoi_approx < best->solution->aoi_approx) best = &pt;
        }
        if (best)
            std::cout << "argmin eps = " << aoi::format_double(best->epsilon)
                      << ", aoi_approx = " << aoi::format_double(best->solution->aoi_approx)
                      << '\n';
        else
            std::cout << "no converged point\n";
        out.write("sweep_eps.csv", aoi::epsilon_csv(pts));
        if (sw_svg) {
            aoi::SvgSeries s{"H = " + std::to_string(h), {}, {}};
            for (const auto& pt : pts)
                if (pt.solution) {
                    s.x.push_back(pt.epsilon);
                    s.y.push_back(pt.solution->aoi_approx);
                }
            out.write("sweep_eps.svg",
                      aoi::svg_line_chart({s}, "Estimated AoI, N = " + std::to_string(sw_n),
                                          "eps = pN", "aoi_approx"));
        }
        out.manifest().parameters = {{"N", sw_n},
                                     {"H", h},
                                     {"eps", {{"lo", range.lo}, {"hi", range.hi}, {"step", range.step}}},
                                     {"pause_on", sw_pause_on},
                                     {"settings", aoi::to_json(settings)}};
        out.finish();
        return 0;
    }

    if (*bench) {
        const auto ns = parse_n_list(b_ns);
        const auto kind = b_policy == "lbop" ? aoi::ReferencePolicy::lbop : aoi::ReferencePolicy::spgp;
        std::vector<aoi::ProtocolSpec> specs;
        for (int n : ns) specs.push_back(aoi::build_age_threshold_aloha(aoi::reference_params(kind, n)));
        aoi::SimConfig config;
        config.seed = b_seed;
        config.threads = threads;
        b_scale.apply(config);
        config.validate();
        const double scale = static_cast<double>(kFullRuns) * static_cast<double>(kFullHorizon) /
                             (static_cast<double>(config.num_runs) * static_cast<double>(config.horizon));

        OutputDir out(out_dir, "bench", args);
        std::ostringstream csv;
        csv << "N,analysis_seconds,simulation_seconds,runs,horizon,scale,"
               "projected_simulation_seconds,ratio\n";
        using clock = std::chrono::steady_clock;
        for (std::size_t i = 0; i < ns.size(); ++i) {
            const auto settings = b_settings.resolve(ns[i]);
            int reps = 0;
            const auto t0 = clock::now();
            double elapsed = 0.0;
            do {
                (void)aoi::analyze_with_retry(specs[i], settings);
                ++reps;
                elapsed = std::chrono::duration<double>(clock::now() - t0).count();
            } while (reps < 3 || elapsed < 0.05);
            const double analysis = elapsed / reps;

            config.num_users = ns[i];
            const auto sim = aoi::simulate(specs[i], config);
            const double projected = sim.wall_time_seconds * scale;
            const double ratio = projected / analysis;
            std::cout << "N=" << ns[i] << " analysis " << analysis << " s, simulation "
                      << sim.wall_time_seconds << " s (x" << scale << " = " << projected
                      << " s), ratio " << ratio << '\n';
            csv << ns[i] << ',' << aoi::format_double(analysis) << ','
                << aoi::format_double(sim.wall_time_seconds) << ',' << config.num_runs << ','
                << config.horizon << ',' << aoi::format_double(scale) << ','
                << aoi::format_double(projected) << ',' << aoi::format_double(ratio) << '\n';
        }
        out.write("bench.csv", csv.str());
        config.num_users = 0;
        out.manifest().parameters = {{"N_list", ns},
                                     {"policy", b_policy},
                                     {"simulation", aoi::to_json(config)},
                                     {"scale", scale}};
        out.manifest().seed = b_seed;
        out.finish();
        return 0;
    }

    if (*rerun) {
        json m;
        try {
            m = json::parse(aoi::read_text(rr_manifest));
        } catch (const json::exception& e) {
            throw aoi::ParseError(rr_manifest + ": " + e.what());
        }
        std::vector<std::string> argv;
        try {
            argv = m.at("argv").get<std::vector<std::string>>();
        } catch (const json::exception& e) {
            throw aoi::ParseError(rr_manifest + ": " + e.what());
        }
        if (!argv.empty() && argv.front() == "rerun") throw UsageError("manifest points at rerun");
        auto override_flag = [&argv](const std::string& flag, const std::string& value) {
            for (std::size_t i = 0; i < argv.size(); ++i) {
                if (argv[i] == flag && i + 1 < argv.size()) {
                    argv[i + 1] = value;
                    return;
                }
                if (argv[i].rfind(flag + "=", 0) == 0) {
                    argv[i] = flag + "=" + value;
                    return;
                }
            }
            argv.push_back(flag);
            argv.push_back(value);
        };
        if (rr_out) override_flag("--out-dir", *rr_out);
        if (rr_threads) override_flag("--threads", std::to_string(*rr_threads));
        return run_cli(argv);
    }
    return 2;
}

int run_cli(std::vector<std::string> args) {
    try {
        return dispatch(std::move(args));
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const aoi::Error& e) {
        std::cerr << "error: " << e.describe() << '\n';
        return aoi::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    return run_cli(std::vector<std::string>(argv + 1, argv + argc));
}

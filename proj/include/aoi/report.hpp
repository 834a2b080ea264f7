#pragma once

#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aoi/error.hpp"
#include "aoi/meanfield.hpp"
#include "aoi/optimizer.hpp"
#include "aoi/simulator.hpp"

namespace aoi {

#ifndef AOI_VERSION
#define AOI_VERSION "1.0.0"
#endif

inline constexpr const char* kToolVersion = AOI_VERSION;
inline constexpr int kCsvSchemaVersion = 1;
inline constexpr const char* kSolutionSchema = "aoi-solution/1";
inline constexpr const char* kManifestSchema = "aoi-manifest/1";

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, end);
}

inline std::string format_optional(const std::optional<double>& x) {
    return x ? format_double(*x) : std::string();
}

// CSV column orders are part of the file format; keep them fixed.

inline std::string surface_csv(const GridSearchResult<AgeThresholdParams>& r) {
    std::ostringstream os;
    os << "H,p,m,v2,aoi_approx,converged\n";
    for (const auto& rec : r.surface)
        os << rec.params.threshold << ',' << format_double(rec.params.tx_prob) << ','
           << format_double(rec.mean_rate) << ',' << format_double(rec.temporal_variance) << ','
           << format_double(rec.aoi_approx) << ',' << (rec.converged ? "true" : "false") << '\n';
    return os.str();
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline std::string skipped_csv(const GridSearchResult<AgeThresholdParams>& r) {
    std::ostringstream os;
    os << "H,p,reason\n";
    for (const auto& s : r.skipped)
        os << s.params.threshold << ',' << format_double(s.params.tx_prob) << ','
           << csv_field(s.reason) << '\n';
    return os.str();
}

inline std::string runs_csv(const SimResult& r) {
    std::ostringstream os;
    os << "run,mean_aoi,empirical_rate,empirical_variance\n";
    for (const auto& run : r.runs)
        os << run.run << ',' << format_double(run.mean_aoi) << ','
           << format_double(run.empirical_rate) << ',' << format_optional(run.empirical_variance)
           << '\n';
    return os.str();
}

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
    std::ostringstream os;
    os << "label,N,mean_aoi,p2.5,p97.5\n";
    for (const auto& row : rows) {
        os << csv_field(row.label) << ',' << row.num_users << ',';
        if (row.result)
            os << format_double(row.result->mean_aoi) << ',' << format_double(row.result->aoi_p025)
               << ',' << format_double(row.result->aoi_p975);
        else
            os << ",,";
        os << '\n';
    }
    return os.str();
}

inline std::string epsilon_csv(const std::vector<EpsilonPoint>& pts) {
    std::ostringstream os;
    os << "eps,aoi_approx,p,m,v2,converged\n";
    for (const auto& pt : pts) {
        os << format_double(pt.epsilon) << ',';
        if (pt.solution) {
            const auto& s = *pt.solution;
            os << format_double(s.aoi_approx) << ',' << format_double(pt.tx_prob) << ','
               << format_double(s.mean_rate) << ',' << format_double(s.temporal_variance) << ','
               << (s.converged ? "true" : "false");
        } else {
            os << ',' << format_double(pt.tx_prob) << ",,,";
        }
        os << '\n';
    }
    return os.str();
}

inline nlohmann::json to_json(const MeanFieldSolution& s) {
    nlohmann::json j;
    j["mu"] = s.mu;
    j["gamma0"] = s.gamma0;
    j["gamma1"] = s.gamma1;
    j["mean_rate"] = s.mean_rate;
    j["temporal_variance"] = s.temporal_variance;
    j["temporal_variance_unclamped"] = s.temporal_variance_unclamped;
    j["aoi_approx"] = s.aoi_approx;
    j["iterations"] = s.iterations;
    j["residual"] = s.residual;
    j["converged"] = s.converged;
    j["covariance_terms"] = s.covariance_terms;
    j["damping"] = s.damping;
    return j;
}

inline nlohmann::json to_json(const AnalysisSettings& s) {
    return {{"num_users", s.num_users},       {"fp_threshold", s.fp_threshold},
            {"fp_max_iters", s.fp_max_iters}, {"damping", s.damping},
            {"cov_k_max", s.cov_k_max},       {"cov_term_tol", s.cov_term_tol},
            {"stat_dist_tol", s.stat_dist_tol}};
}

/// Overrides fields of `s` present in `j`; unknown keys are rejected.
inline void apply_settings_json(const nlohmann::json& j, AnalysisSettings& s) {
    if (!j.is_object()) throw ParseError("settings file must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "fp_threshold") s.fp_threshold = value.get<double>();
            else if (key == "fp_max_iters") s.fp_max_iters = value.get<int>();
            else if (key == "damping") s.damping = value.get<double>();
            else if (key == "cov_k_max") s.cov_k_max = value.get<int>();
            else if (key == "cov_term_tol") s.cov_term_tol = value.get<double>();
            else if (key == "stat_dist_tol") s.stat_dist_tol = value.get<double>();
            else if (key == "num_users") s.num_users = value.get<int>();
            else throw ParseError("unknown settings key '" + key + "'");
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("settings key '" + key + "': " + e.what());
        }
    }
}

inline nlohmann::json to_json(const AgeThresholdParams& p) {
    return {{"H", p.threshold}, {"p", p.tx_prob}};
}

inline nlohmann::json to_json(const SimConfig& c) {
    return {{"num_users", c.num_users}, {"horizon", c.horizon}, {"num_runs", c.num_runs},
            {"seed", c.seed},           {"batches", c.batches},
            {"seed_derivation", "run r uses mt19937_64(mix64(seed + 0x9E3779B97F4A7C15*(r+1)))"}};
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Provenance record written next to every command's outputs. `argv`
/// alone is enough to re-run the command.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    nlohmann::json parameters = nlohmann::json::object();
    std::optional<std::uint64_t> seed;
    std::string started_utc;
    std::string finished_utc;
    std::vector<std::string> outputs;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = kManifestSchema;
        j["tool"] = "aoi";
        j["version"] = kToolVersion;
        j["command"] = command;
        j["argv"] = argv;
        j["parameters"] = parameters;
        j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
        j["started_utc"] = started_utc;
        j["finished_utc"] = finished_utc;
        j["outputs"] = outputs;
        j["csv_schema_version"] = kCsvSchemaVersion;
        return j;
    }

    std::string file_name() const { return command + ".manifest.json"; }
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct SvgSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Minimal line chart for quick looks at CSV data. Not a plotting library.
inline std::string svg_line_chart(const std::vector<SvgSeries>& series, const std::string& title,
                                  const std::string& x_label, const std::string& y_label) {
    constexpr double w = 640, h = 400, left = 70, right = 20, top = 40, bottom = 50;
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (w - left - right); };
    auto py = [&](double y) { return h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right
       << "\" y2=\"" << h - bottom << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
       << h - bottom << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">" << x_label
       << "</text>\n";
    os << "<text x=\"15\" y=\"" << h / 2 << "\" transform=\"rotate(-90 15 " << h / 2
       << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
    for (int t = 0; t <= 4; ++t) {
        const double xv = x0 + (x1 - x0) * t / 4, yv = y0 + (y1 - y0) * t / 4;
        os << "<text x=\"" << px(xv) << "\" y=\"" << h - bottom + 16
           << "\" text-anchor=\"middle\">" << format_double(std::round(xv * 100) / 100)
           << "</text>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
           << format_double(std::round(yv * 10) / 10) << "</text>\n";
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = colors[k % 5];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            if (std::isfinite(s.y[i])) os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
        os << "\"/>\n";
        os << "<text x=\"" << w - right - 80 << "\" y=\"" << top + 16 * (k + 1) << "\" fill=\""
           << color << "\">" << s.label << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace aoi

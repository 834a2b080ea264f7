#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "aoi/error.hpp"
#include "aoi/protocol.hpp"

namespace aoi {

// Protocol files are JSON objects:
//   { "num_states": S, "tx_state": 1-based, "m0": [[..S..] x S], "m1": [...] }
// Doubles are emitted in shortest round-trip form, so write -> read is
// bit-exact.

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
    auto rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto row = m.row(i);
        rows.push_back(nlohmann::json(std::vector<double>(row.begin(), row.end())));
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const char* field, std::size_t n) {
    if (!j.is_array())
        throw ParseError(std::string("field '") + field + "' must be an array of rows");
    if (j.size() != n)
        throw ParseError(std::string("dimension mismatch in '") + field + "': " +
                         std::to_string(j.size()) + " rows, expected " + std::to_string(n));
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = j[i];
        if (!row.is_array() || row.size() != n)
            throw ParseError(std::string("dimension mismatch in '") + field + "' row " +
                             std::to_string(i + 1) + ": " +
                             std::to_string(row.is_array() ? row.size() : 0) +
                             " entries, expected " + std::to_string(n));
        for (std::size_t c = 0; c < n; ++c) {
            if (!row[c].is_number())
                throw ParseError(std::string("'") + field + "' entry (" + std::to_string(i + 1) +
                                 ", " + std::to_string(c + 1) + ") is not a number");
            m(i, c) = row[c].get<double>();
        }
    }
    return m;
}

inline int int_field(const nlohmann::json& j, const char* field) {
    if (!j.contains(field)) throw ParseError(std::string("missing field '") + field + "'");
    const auto& v = j.at(field);
    if (!v.is_number_integer())
        throw ParseError(std::string("field '") + field + "' must be an integer");
    return v.get<int>();
}

}  // namespace detail

inline nlohmann::json to_json(const ProtocolSpec& spec) {
    nlohmann::json j;
    j["num_states"] = spec.num_states;
    j["tx_state"] = spec.tx_state;
    j["m0"] = detail::matrix_to_json(spec.m0);
    j["m1"] = detail::matrix_to_json(spec.m1);
    return j;
}

/// Parses and validates. Structural problems raise ParseError; a
/// well-formed spec that breaks an invariant raises ValidationError.
inline ProtocolSpec spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("protocol spec must be a JSON object");
    ProtocolSpec spec;
    spec.num_states = detail::int_field(j, "num_states");
    spec.tx_state = detail::int_field(j, "tx_state");
    if (spec.num_states < 1)
        throw ParseError("field 'num_states' must be positive (got " +
                         std::to_string(spec.num_states) + ")");
    const auto n = static_cast<std::size_t>(spec.num_states);
    for (const char* f : {"m0", "m1"})
        if (!j.contains(f)) throw ParseError(std::string("missing field '") + f + "'");
    spec.m0 = detail::matrix_from_json(j.at("m0"), "m0", n);
    spec.m1 = detail::matrix_from_json(j.at("m1"), "m1", n);
    require_valid(spec);
    return spec;
}

inline ProtocolSpec parse_spec(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what());
    }
    return spec_from_json(j);
}

inline ProtocolSpec read_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open protocol spec '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_spec(buf.str());
    } catch (Error& e) {
        e.set_stage(path.string());
        throw;
    }
}

inline void write_spec(const ProtocolSpec& spec, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write protocol spec '" + path.string() + "'");
    out << to_json(spec).dump(2) << '\n';
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace aoi

// qmat_io.hpp - JSON state/operator files
//
//   {"layout": [{"label": "A", "dim": 2}, ...], "entries": [[re, im], ...]}
//
// Entries are row-major. Doubles are written with 17 significant digits, which
// reproduces every IEEE-754 double exactly on re-read.

#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "qmat.hpp"

namespace locclab {

namespace detail {

inline void append_double(std::string& out, double x) {
    if (!std::isfinite(x)) throw NumericError("cannot serialize non-finite value");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out += buf;
}

inline std::string layout_json(const TensorLayout& layout) {
    std::string out = "[";
    for (std::size_t k = 0; k < layout.size(); ++k) {
        if (k) out += ",";
        out += "{\"label\":" + nlohmann::json(layout[k].label).dump() +
               ",\"dim\":" + std::to_string(layout[k].dim) + "}";
    }
    return out + "]";
}

inline TensorLayout layout_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw ParseError("\"layout\" must be an array", 0);
    std::vector<Factor> f;
    for (const auto& e : j) {
        if (!e.is_object() || !e.contains("label") || !e.contains("dim") || e.size() != 2)
            throw ParseError("layout entries must be {\"label\", \"dim\"} objects", 0);
        if (!e["label"].is_string() || !e["dim"].is_number_integer() || e["dim"].get<long long>() < 1)
            throw ParseError("layout entry has a bad label or dim", 0);
        f.push_back({e["label"].get<std::string>(), e["dim"].get<std::size_t>()});
    }
    return TensorLayout(std::move(f));
}

inline nlohmann::json parse_json_text(const std::string& text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what(), e.byte);
    }
}

} // namespace detail

inline std::string to_json_text(const Operator& op) {
    std::string out = "{\"layout\":" + detail::layout_json(op.layout()) + ",\"entries\":[";
    const Matrix& m = op.matrix();
    bool first = true;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (!first) out += ",";
            first = false;
            out += "[";
            detail::append_double(out, m(r, c).real());
            out += ",";
            detail::append_double(out, m(r, c).imag());
            out += "]";
        }
    return out + "]}";
}

inline std::string to_json_text(const DensityOperator& rho) { return to_json_text(rho.op()); }

inline Operator operator_from_json_text(const std::string& text) {
    const nlohmann::json j = detail::parse_json_text(text);
    if (!j.is_object() || !j.contains("layout") || !j.contains("entries"))
        throw ParseError("state file needs \"layout\" and \"entries\"", 0);
    const TensorLayout layout = detail::layout_from_json(j["layout"]);
    const auto& e = j["entries"];
    const std::size_t n = layout.total_dim();
    if (!e.is_array() || e.size() != n * n)
        throw ParseError("\"entries\" must hold dim*dim = " + std::to_string(n * n) + " pairs", 0);
    Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n * n; ++i) {
        const auto& p = e[i];
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
            throw ParseError("entry " + std::to_string(i) + " is not a [re, im] pair", 0);
        m(static_cast<Eigen::Index>(i / n), static_cast<Eigen::Index>(i % n)) =
            cplx(p[0].get<double>(), p[1].get<double>());
    }
    return Operator(layout, std::move(m));
}

inline DensityOperator density_from_json_text(const std::string& text) {
    return DensityOperator(operator_from_json_text(text));
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << text;
}

inline DensityOperator load_density(const std::string& path) {
    return density_from_json_text(read_text_file(path));
}

} // namespace locclab

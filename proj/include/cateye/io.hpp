#pragma once

// Deterministic text output: delimited tables, SVG contour plots, checksums.
// All number formatting goes through std::to_chars, so output is locale
// independent and reproducible bit for bit.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cateye/geometry.hpp"
#include "cateye/topology.hpp"

namespace cateye {

class OutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";  // folds -0
    std::array<char, 32> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), r.ptr);
}

/// Fixed-point with `digits` decimals; used for SVG coordinates.
inline std::string format_fixed(double v, int digits) {
    std::array<char, 64> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, digits);
    std::string s(buf.data(), r.ptr);
    if (s.find_first_not_of("-0.") == std::string::npos) return digits > 0 ? "0." + std::string(static_cast<std::size_t>(digits), '0') : "0";
    return s;
}

using Cell = std::variant<std::string, double, long long, bool>;

inline std::string format_cell(const Cell& c) {
    struct V {
        std::string operator()(const std::string& s) const { return s; }
        std::string operator()(double d) const { return format_double(d); }
        std::string operator()(long long i) const { return std::to_string(i); }
        std::string operator()(bool b) const { return b ? "true" : "false"; }
    };
    return std::visit(V{}, c);
}

/// Header plus rows; column order is fixed by the header.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;

    Table() = default;
    explicit Table(std::vector<std::string> columns) : header(std::move(columns)) {}

    void add(std::vector<Cell> row) {
        if (row.size() != header.size()) throw OutputError("row has " + std::to_string(row.size()) + " cells, header has " + std::to_string(header.size()));
        rows.push_back(std::move(row));
    }

    std::string str(char delim = ',') const {
        std::string out;
        auto line = [&](const auto& cells, auto&& fmt) {
            for (std::size_t k = 0; k < cells.size(); ++k) {
                if (k) out += delim;
                out += fmt(cells[k]);
            }
            out += '\n';
        };
        line(header, [](const std::string& s) { return s; });
        for (const auto& r : rows) line(r, [](const Cell& c) { return format_cell(c); });
        return out;
    }
};

// 64-bit FNV-1a
inline std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int k = 15; k >= 0; --k, v >>= 4) s[static_cast<std::size_t>(k)] = digits[v & 0xf];
    return s;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw OutputError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes `text` to `path` (creating parent directories); returns the checksum.
inline std::string write_text(const std::filesystem::path& path, std::string_view text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw OutputError("cannot create " + path.parent_path().string() + ": " + ec.message());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw OutputError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw OutputError("write failed: " + path.string());
    return hex64(fnv1a(text));
}

inline std::string export_table(const Table& t, const std::filesystem::path& path, char delim = ',') { return write_text(path, t.str(delim)); }

// ---------------------------------------------------------------- tables of results

/// Node table: x, y, psi, u1, u2, omega.
inline Table node_table(const ScalarField& psi, const VectorField& u, const ScalarField& omega) {
    const ChannelGrid& g = psi.g();
    Table t({"i", "j", "x", "y", "psi", "u1", "u2", "omega"});
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i)
            t.add({static_cast<long long>(i), static_cast<long long>(j), g.x(i), g.eta(j) * g.jacobian(i), psi(i, j), u.first(i, j), u.second(i, j), omega(i, j)});
    return t;
}

/// One row per traced orbit.
inline Table orbit_table(const TopologyReport& rep) {
    Table t({"orbit", "seed_x", "seed_y", "status", "closed", "x_winding", "contractible", "island", "level", "level_drift", "length", "points"});
    auto row = [&](std::size_t k, const Orbit& o, bool island) {
        t.add({static_cast<long long>(k), o.seed.x, o.seed.y, to_string(o.status), o.closed, static_cast<long long>(o.x_winding), o.contractible, island, o.level,
               o.level_drift, o.length, static_cast<long long>(o.points.size())});
    };
    std::size_t k = 0;
    for (const auto& o : rep.island_orbits) row(k++, o, true);
    for (const auto& o : rep.orbits) row(k++, o, false);
    return t;
}

/// Traced polylines, one row per vertex.
inline Table orbit_points_table(const TopologyReport& rep) {
    Table t({"orbit", "k", "x", "y"});
    std::size_t id = 0;
    auto add = [&](const Orbit& o) {
        for (std::size_t k = 0; k < o.points.size(); ++k) t.add({static_cast<long long>(id), static_cast<long long>(k), o.points[k].x, o.points[k].y});
        ++id;
    };
    for (const auto& o : rep.island_orbits) add(o);
    for (const auto& o : rep.orbits) add(o);
    return t;
}

inline Table critical_table(const CriticalSet& cs) {
    Table t({"kind", "x", "y", "type", "value", "hessian_det", "gradient_norm", "on_wall"});
    for (const auto& p : cs.points)
        t.add({std::string("point"), p.position.x, p.position.y, to_string(p.type), p.value, p.hessian_det, p.gradient_norm, p.on_wall});
    for (const auto& l : cs.lines)
        t.add({std::string("line"), std::numeric_limits<double>::quiet_NaN(), l.eta(), std::string("line"), std::numeric_limits<double>::quiet_NaN(),
               std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(), false});
    return t;
}

inline Table centerline_table(const CenterlineReport& rep) {
    Table t({"x", "y", "abs_u2", "class"});
    for (const auto& s : rep.samples) t.add({s.point.x, s.point.y, s.abs_u2, to_string(s.classification)});
    return t;
}

// ---------------------------------------------------------------- SVG

struct SvgStyle {
    double width = 900.0;        ///< pixels across one period
    std::size_t levels = 20;
    int digits = 2;              ///< decimals in coordinates
};

/// Contours of psi at `levels` evenly spaced interior levels, in physical
/// coordinates, with both walls and contractible orbits drawn on top.
inline std::string render_contours(const ScalarField& psi, const std::vector<Orbit>& orbits, const SvgStyle& style = {}) {
    if (!psi.all_finite()) throw OutputError("cannot render a field with non-finite values");
    const ChannelGrid& g = psi.g();
    double ymax = 0.0;
    for (std::size_t i = 0; i < g.nx(); ++i) ymax = std::max(ymax, g.jacobian(i));
    const double margin = 0.05 * ymax;
    const double scale = style.width / two_pi;
    const double height = std::round(2.0 * (ymax + margin) * scale);
    const double y0 = ymax + margin;
    auto X = [&](double x) { return format_fixed(x * scale, style.digits); };
    auto Y = [&](double y) { return format_fixed((y0 - y) * scale, style.digits); };

    double lo = psi.values()[0], hi = lo;
    for (double v : psi.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_fixed(style.width, 0) + "\" height=\"" + format_fixed(height, 0) +
         "\" viewBox=\"0 0 " + format_fixed(style.width, 0) + " " + format_fixed(height, 0) + "\">\n";
    s += "<defs><clipPath id=\"period\"><rect x=\"0\" y=\"0\" width=\"" + format_fixed(style.width, 0) + "\" height=\"" + format_fixed(height, 0) +
         "\"/></clipPath></defs>\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    s += "<g fill=\"none\" stroke=\"#3a6ea5\" stroke-width=\"0.8\">\n";
    if (hi > lo) {
        for (std::size_t k = 0; k < style.levels; ++k) {
            const double level = lo + (hi - lo) * (static_cast<double>(k) + 0.5) / static_cast<double>(style.levels);
            const auto segs = contour_segments(psi, level);
            if (segs.empty()) continue;
            s += "<path d=\"";
            for (const auto& sg : segs) s += "M" + X(sg.a.x) + " " + Y(sg.a.y) + "L" + X(sg.b.x) + " " + Y(sg.b.y);
            s += "\"/>\n";
        }
    }
    s += "</g>\n";

    // walls, sampled finely
    s += "<g fill=\"none\" stroke=\"black\" stroke-width=\"1.5\">\n";
    const std::size_t nw = 4 * g.nx();
    for (double sign : {1.0, -1.0}) {
        s += "<polyline points=\"";
        for (std::size_t k = 0; k <= nw; ++k) {
            const double x = two_pi * static_cast<double>(k) / static_cast<double>(nw);
            if (k) s += ' ';
            s += X(x) + "," + Y(sign * g.jacobian_at(x, 0));
        }
        s += "\"/>\n";
    }
    s += "</g>\n";

    // contractible orbits, drawn at the periodic translates that touch the period
    s += "<g fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" clip-path=\"url(#period)\">\n";
    for (const auto& o : orbits) {
        if (!o.contractible || o.points.size() < 2) continue;
        double xmin = o.points[0].x, xmax = xmin;
        for (const auto& p : o.points) {
            xmin = std::min(xmin, p.x);
            xmax = std::max(xmax, p.x);
        }
        for (double k = std::floor(-xmax / two_pi); xmin + k * two_pi < two_pi; k += 1.0) {
            if (xmax + k * two_pi < 0.0) continue;
            s += "<polygon points=\"";
            for (std::size_t q = 0; q < o.points.size(); ++q) {
                if (q) s += ' ';
                s += X(o.points[q].x + k * two_pi) + "," + Y(o.points[q].y);
            }
            s += "\"/>\n";
        }
    }
    s += "</g>\n</svg>\n";
    return s;
}

inline std::string render_contours(const ScalarField& psi, const std::vector<Orbit>& orbits, const std::filesystem::path& path,
                                   const SvgStyle& style = {}) {
    return write_text(path, render_contours(psi, orbits, style));
}

}  // namespace cateye

#pragma once

// Experiment drivers behind the CLI. Every driver writes its outputs below
// one directory and returns a RunManifest; cells run on a small thread pool
// and a failing cell is recorded, never fatal to the run.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "cateye/carleman.hpp"
#include "cateye/config.hpp"
#include "cateye/dirichlet_eigen.hpp"
#include "cateye/equilibrium.hpp"
#include "cateye/homology.hpp"
#include "cateye/io.hpp"
#include "cateye/topology.hpp"

namespace cateye {

struct OutputFile {
    std::string path;  ///< relative to the output directory
    std::string checksum;
};

struct CellRecord {
    std::string name;
    bool ok = false;
    std::string error;
    double seconds = 0.0;
    std::vector<OutputFile> files;
};

struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::vector<CellRecord> cells;
    std::vector<OutputFile> files;  ///< run-level tables
    std::vector<std::string> warnings;
    double seconds = 0.0;

    bool complete() const {
        return std::all_of(cells.begin(), cells.end(), [](const CellRecord& c) { return c.ok; });
    }
    std::size_t failed() const {
        return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const CellRecord& c) { return !c.ok; }));
    }
    std::vector<OutputFile> all_files() const {
        std::vector<OutputFile> out = files;
        for (const auto& c : cells) out.insert(out.end(), c.files.begin(), c.files.end());
        return out;
    }
};

/// Runs fn(0..n-1) on up to `workers` threads. fn must not throw.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t k = 0; k < n; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < n; k = next++) fn(k);
        });
    for (auto& t : pool) t.join();
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Uniform in [0, 1) from the raw 64-bit stream; the standard distributions
/// are implementation-defined, the engine output is not.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

class CellWriter {
public:
    CellWriter(std::filesystem::path root, CellRecord& rec) : root_(std::move(root)), rec_(rec) {}
    void table(const std::string& rel, const Table& t) { rec_.files.push_back({rel, export_table(t, root_ / rel)}); }
    void text(const std::string& rel, const std::string& s) { rec_.files.push_back({rel, write_text(root_ / rel, s)}); }

private:
    std::filesystem::path root_;
    CellRecord& rec_;
};

/// Runs each cell body, catching failures and timing it.
inline std::vector<CellRecord> run_cells(const std::vector<std::string>& names, std::size_t workers, const std::filesystem::path& root,
                                         const std::function<void(std::size_t, CellWriter&)>& body) {
    std::vector<CellRecord> cells(names.size());
    parallel_for(names.size(), workers, [&](std::size_t k) {
        CellRecord& rec = cells[k];
        rec.name = names[k];
        const auto t0 = Clock::now();
        CellWriter w(root, rec);
        try {
            body(k, w);
            rec.ok = true;
        } catch (const std::exception& e) {
            rec.ok = false;
            rec.error = e.what();
        }
        rec.seconds = seconds_since(t0);
    });
    return cells;
}

/// Comma-free description, e.g. "constant(c=-1)".
inline std::string describe(const VorticityProfile& F) {
    return std::visit(
        [](const auto& k) -> std::string {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, ConstantVorticity>) return "constant(c=" + format_double(k.c) + ")";
            else if constexpr (std::is_same_v<T, AffineVorticity>) return "affine(a=" + format_double(k.a) + " b=" + format_double(k.b) + ")";
            else return "stuart(kappa=" + format_double(k.kappa) + ")";
        },
        F.kind());
}

inline std::string eps_name(std::size_t k) { return "eps" + std::to_string(k); }

inline constexpr double nan = std::numeric_limits<double>::quiet_NaN();

}  // namespace detail

// ---------------------------------------------------------------- manifest

inline nlohmann::json manifest_json(const RunManifest& m, bool with_timings = true) {
    auto files = [](const std::vector<OutputFile>& fs) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& f : fs) a.push_back({{"path", f.path}, {"fnv1a64", f.checksum}});
        return a;
    };
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : m.cells) {
        nlohmann::json j = {{"name", c.name}, {"ok", c.ok}, {"error", c.error}, {"files", files(c.files)}};
        if (with_timings) j["seconds"] = c.seconds;
        cells.push_back(std::move(j));
    }
    nlohmann::json j = {{"command", m.command}, {"config", m.config}, {"files", files(m.files)}, {"cells", cells}, {"warnings", m.warnings}};
    if (with_timings) j["seconds"] = m.seconds;
    return j;
}

inline void write_manifest(const RunManifest& m, const std::filesystem::path& dir) { write_text(dir / "manifest.json", manifest_json(m).dump(2) + "\n"); }

/// Every listed file exists and matches its checksum.
inline bool verify_manifest(const RunManifest& m, const std::filesystem::path& dir) {
    for (const auto& f : m.all_files()) {
        if (!std::filesystem::exists(dir / f.path)) return false;
        if (hex64(fnv1a(read_file(dir / f.path))) != f.checksum) return false;
    }
    return true;
}

// ---------------------------------------------------------------- drivers

namespace detail {

inline RunManifest start(const std::string& command, const ExperimentConfig& cfg) {
    RunManifest m;
    m.command = command;
    m.config = to_json(cfg);
    m.warnings = validate(cfg);
    return m;
}

inline GridPtr grid_for(const ExperimentConfig& cfg, double eps) { return build_grid(cfg.profile.scaled(eps), cfg.nx, cfg.ny); }

/// Island orbits plus every contractible lattice orbit, for plotting.
inline std::vector<Orbit> plotted_orbits(const TopologyReport& rep) {
    std::vector<Orbit> out = rep.island_orbits;
    for (const auto& o : rep.orbits)
        if (o.contractible) out.push_back(o);
    return out;
}

inline TopologyOptions topology_options(const ExperimentConfig& cfg) {
    TopologyOptions o;
    o.centerline_samples = cfg.centerline_samples;
    return o;
}

}  // namespace detail

/// (eps, lambda1, residual, iterations) for each eps.
inline RunManifest run_eigen(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    const auto t0 = detail::Clock::now();
    RunManifest m = detail::start("eigen", cfg);
    std::vector<std::string> names;
    for (std::size_t k = 0; k < cfg.eps.size(); ++k) names.push_back(detail::eps_name(k));
    std::vector<EigenResult> res(cfg.eps.size());
    m.cells = detail::run_cells(names, cfg.workers, out, [&](std::size_t k, detail::CellWriter&) {
        res[k] = smallest_dirichlet_eigenvalue(detail::grid_for(cfg, cfg.eps[k]), cfg.eigen());
    });
    Table t({"eps", "lambda1", "residual", "iterations"});
    for (std::size_t k = 0; k < cfg.eps.size(); ++k)
        if (m.cells[k].ok) t.add({cfg.eps[k], res[k].lambda1, res[k].residual, static_cast<long long>(res[k].iterations)});
    m.files.push_back({"eigen.csv", export_table(t, out / "eigen.csv")});
    m.seconds = detail::seconds_since(t0);
    return m;
}

/// Solves at each eps; node tables per eps plus a summary.
inline RunManifest run_solve(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    const auto t0 = detail::Clock::now();
    RunManifest m = detail::start("solve", cfg);
    std::vector<std::string> names;
    for (std::size_t k = 0; k < cfg.eps.size(); ++k) names.push_back(detail::eps_name(k));
    std::vector<EquilibriumSolution> sols(cfg.eps.size());
    m.cells = detail::run_cells(names, cfg.workers, out, [&](std::size_t k, detail::CellWriter& w) {
        sols[k] = solve_equilibrium(detail::grid_for(cfg, cfg.eps[k]), cfg.vorticity, cfg.gap, cfg.newton());
        w.table("solve/" + names[k] + ".csv", node_table(sols[k].psi, sols[k].u, sols[k].omega));
    });
    Table t({"eps", "gap", "c1", "c2", "pde_residual", "newton_iterations", "symmetry_residual"});
    for (std::size_t k = 0; k < cfg.eps.size(); ++k)
        if (m.cells[k].ok) {
            const auto& s = sols[k];
            t.add({cfg.eps[k], cfg.gap, s.c1, s.c2, s.pde_residual, static_cast<long long>(s.newton_iterations), symmetry_residual(s.psi)});
        }
    m.files.push_back({"solve.csv", export_table(t, out / "solve.csv")});
    m.seconds = detail::seconds_since(t0);
    return m;
}

struct TopologySummary {
    double eps = 0.0;
    TopologyReport report;
};

/// Solve + classify at each eps: orbit, critical-point and centerline tables.
inline RunManifest run_topology(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    const auto t0 = detail::Clock::now();
    RunManifest m = detail::start("topology", cfg);
    std::vector<std::string> names;
    for (std::size_t k = 0; k < cfg.eps.size(); ++k) names.push_back(detail::eps_name(k));
    std::vector<TopologyReport> reps(cfg.eps.size());
    m.cells = detail::run_cells(names, cfg.workers, out, [&](std::size_t k, detail::CellWriter& w) {
        const auto sol = solve_equilibrium(detail::grid_for(cfg, cfg.eps[k]), cfg.vorticity, cfg.gap, cfg.newton());
        reps[k] = classify_flow(sol, detail::topology_options(cfg));
        const std::string base = "topology/" + names[k];
        w.table(base + "_orbits.csv", orbit_table(reps[k]));
        w.table(base + "_orbit_points.csv", orbit_points_table(reps[k]));
        w.table(base + "_critical.csv", critical_table(reps[k].critical));
        w.table(base + "_centerline.csv", centerline_table(reps[k].centerline));
    });
    Table t({"eps", "gap", "islands", "wrapping_orbits", "elliptic", "hyperbolic", "degenerate", "critical_lines", "symmetry_residual",
             "centerline_tested", "centerline_contractible_fraction", "centerline_wrapping", "max_level_drift"});
    for (std::size_t k = 0; k < cfg.eps.size(); ++k) {
        if (!m.cells[k].ok) continue;
        const auto& r = reps[k];
        t.add({cfg.eps[k], cfg.gap, static_cast<long long>(r.islands), static_cast<long long>(r.wrapping_orbits),
               static_cast<long long>(r.critical.count(CriticalType::Elliptic)), static_cast<long long>(r.critical.count(CriticalType::Hyperbolic)),
               static_cast<long long>(r.critical.count(CriticalType::Degenerate)), static_cast<long long>(r.critical.lines.size()), r.symmetry_residual,
               static_cast<long long>(r.centerline.tested()), r.centerline.contractible_fraction(),
               static_cast<long long>(r.centerline.count(CenterlineClass::Wrapping)), r.max_level_drift});
    }
    m.files.push_back({"topology.csv", export_table(t, out / "topology.csv")});
    m.seconds = detail::seconds_since(t0);
    return m;
}

/// Contour plots with island orbits for each eps.
inline RunManifest run_render(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    const auto t0 = detail::Clock::now();
    RunManifest m = detail::start("render", cfg);
    std::vector<std::string> names;
    for (std::size_t k = 0; k < cfg.eps.size(); ++k) names.push_back(detail::eps_name(k));
    m.cells = detail::run_cells(names, cfg.workers, out, [&](std::size_t k, detail::CellWriter& w) {
        const auto sol = solve_equilibrium(detail::grid_for(cfg, cfg.eps[k]), cfg.vorticity, cfg.gap, cfg.newton());
        const auto rep = classify_flow(sol, detail::topology_options(cfg));
        w.text("render/" + names[k] + ".svg", render_contours(sol.psi, detail::plotted_orbits(rep)));
    });
    m.seconds = detail::seconds_since(t0);
    return m;
}

/// Carleman ratio sweeps for `bumps` test functions on the matrix_eps
/// channel. Bump centers are drawn from the seed.
inline RunManifest run_carleman(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    const auto t0 = detail::Clock::now();
    RunManifest m = detail::start("carleman", cfg);
    const auto& cc = cfg.carleman;
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::pair<double, double>> centers;
    for (std::size_t b = 0; b < cc.bumps; ++b) {
        const double cx = two_pi * detail::unit_uniform(rng);
        const double cy = 0.45 + 0.1 * detail::unit_uniform(rng);
        centers.emplace_back(cx, cy);
    }
    std::vector<std::string> names;
    for (std::size_t b = 0; b < cc.bumps; ++b) names.push_back("bump" + std::to_string(b));
    auto grid = detail::grid_for(cfg, cfg.matrix_eps);
    const CarlemanWeight wt(grid, cc.lambda);
    std::vector<std::vector<SweepRow>> rows(cc.bumps);
    m.cells = detail::run_cells(names, cfg.workers, out, [&](std::size_t b, detail::CellWriter&) {
        const TestFunction t(bump(grid, centers[b].first, centers[b].second, cc.radius));
        rows[b] = carleman_ratio_sweep(t, wt, cc.m, cc.cutoff);
    });
    Table t({"bump", "cx", "cy", "m", "lhs", "rhs", "ratio", "log_lhs", "log_rhs", "log_ratio", "log_decay", "defined"});
    for (std::size_t b = 0; b < cc.bumps; ++b) {
        if (!m.cells[b].ok) continue;
        for (const auto& r : rows[b])
            t.add({static_cast<long long>(b), centers[b].first, centers[b].second, r.m, r.lhs, r.rhs, r.ratio, r.log_lhs, r.log_rhs, r.log_ratio, r.log_decay,
                   r.defined});
    }
    m.files.push_back({"carleman.csv", export_table(t, out / "carleman.csv")});
    m.seconds = detail::seconds_since(t0);
    return m;
}

struct MatrixCell {
    std::string name;
    double eps = 0.0;
    double gap = 0.0;
    VorticityProfile vorticity;
    // results (NaN / 0 when the cell failed)
    double lambda1 = detail::nan;
    double projection = detail::nan;
    double symmetry_residual = detail::nan;
    double pde_residual = detail::nan;
    double min_speed = detail::nan;
    std::size_t islands = 0, wrapping_orbits = 0;
    bool trivial_homology = false;
};

inline std::vector<MatrixCell> matrix_cells(const ExperimentConfig& cfg) {
    return {
        {"flat_gap0", 0.0, 0.0, cfg.vorticity},
        {"flat_gap", 0.0, cfg.matrix_gap, cfg.matrix_gap_vorticity},
        {"curved_gap0", cfg.matrix_eps, 0.0, cfg.vorticity},
        {"curved_gap", cfg.matrix_eps, cfg.matrix_gap, cfg.matrix_gap_vorticity},
    };
}

/// The 2x2 matrix {flat, curved} x {gap 0, gap != 0}: solve, classify,
/// tabulate, render one SVG per cell.
inline RunManifest run_island_matrix(const ExperimentConfig& cfg, const std::filesystem::path& out, std::vector<MatrixCell>* results = nullptr) {
    const auto t0 = detail::Clock::now();
    RunManifest m = detail::start("matrix", cfg);
    auto cells = matrix_cells(cfg);
    std::vector<std::string> names;
    for (const auto& c : cells) names.push_back(c.name);
    m.cells = detail::run_cells(names, cfg.workers, out, [&](std::size_t k, detail::CellWriter& w) {
        MatrixCell& c = cells[k];
        auto grid = detail::grid_for(cfg, c.eps);
        c.lambda1 = smallest_dirichlet_eigenvalue(grid, cfg.eigen()).lambda1;
        const auto sol = solve_equilibrium(grid, c.vorticity, c.gap, cfg.newton());
        const auto gen = harmonic_generator(grid);
        c.projection = homology_projection(sol.u, gen);
        c.trivial_homology = has_trivial_homology(sol.u, gen, cfg.homology_tol);
        c.pde_residual = sol.pde_residual;
        c.symmetry_residual = symmetry_residual(sol.psi);
        double umin = std::numeric_limits<double>::infinity();
        for (std::size_t q = 0; q < sol.psi.size(); ++q) umin = std::min(umin, std::hypot(sol.u.first[q], sol.u.second[q]));
        c.min_speed = umin;
        const auto rep = classify_flow(sol, detail::topology_options(cfg));
        c.islands = rep.islands;
        c.wrapping_orbits = rep.wrapping_orbits;
        w.table("matrix/" + c.name + "_orbits.csv", orbit_table(rep));
        w.table("matrix/" + c.name + "_critical.csv", critical_table(rep.critical));
        w.text("matrix/" + c.name + ".svg", render_contours(sol.psi, detail::plotted_orbits(rep)));
    });
    Table t({"cell", "eps", "gap", "vorticity", "status", "lambda1", "projection", "trivial_homology", "islands", "wrapping_orbits", "symmetry_residual",
             "pde_residual", "min_speed"});
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const auto& c = cells[k];
        const bool ok = m.cells[k].ok;
        t.add({c.name, c.eps, c.gap, detail::describe(c.vorticity), std::string(ok ? "ok" : "failed"), c.lambda1, ok ? c.projection : detail::nan,
               ok && c.trivial_homology, static_cast<long long>(c.islands), static_cast<long long>(c.wrapping_orbits), ok ? c.symmetry_residual : detail::nan,
               ok ? c.pde_residual : detail::nan, ok ? c.min_speed : detail::nan});
    }
    m.files.push_back({"matrix.csv", export_table(t, out / "matrix.csv")});
    if (results) *results = cells;
    m.seconds = detail::seconds_since(t0);
    return m;
}

}  // namespace cateye

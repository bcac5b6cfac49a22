#pragma once

// Experiment configuration: JSON in, validated struct out, and back.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cateye/dirichlet_eigen.hpp"
#include "cateye/equilibrium.hpp"
#include "cateye/geometry.hpp"

namespace cateye {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SlopeCheck { Warn, Error };

struct CarlemanConfig {
    double lambda = 2.0;
    std::vector<double> m = {4, 8, 16, 32};
    std::size_t bumps = 5;
    double radius = 0.2;
    double cutoff = 0.1;
    bool operator==(const CarlemanConfig&) const = default;
};

struct ExperimentConfig {
    /// wall shape before scaling; h = eps * profile
    BoundaryProfile profile = BoundaryProfile::cosine(1.0);
    std::vector<double> eps = {0.0, 0.05, 0.1, 0.2};
    VorticityProfile vorticity = VorticityProfile::constant(1.0);
    double gap = 0.0;

    // the 2x2 matrix: {flat, matrix_eps} x {0, matrix_gap}
    double matrix_eps = 0.05;
    double matrix_gap = 2.02;
    VorticityProfile matrix_gap_vorticity = VorticityProfile::constant(-1.0);

    std::size_t nx = 128, ny = 65;

    double newton_tol = 1e-10;
    int newton_max_iterations = 200;
    double eigen_tol = 1e-9;
    double symmetry_tol = 1e-6;
    double homology_tol = 1e-6;

    std::size_t centerline_samples = 64;
    CarlemanConfig carleman;

    double affine_slope_cap = 10.0;
    SlopeCheck slope_check = SlopeCheck::Warn;

    std::string output = "out";
    std::uint64_t seed = 1;
    std::size_t workers = 1;

    bool operator==(const ExperimentConfig&) const = default;

    NewtonOptions newton() const {
        NewtonOptions o;
        o.tol = newton_tol;
        o.max_iterations = newton_max_iterations;
        return o;
    }
    EigenOptions eigen() const {
        EigenOptions o;
        o.tol = eigen_tol;
        return o;
    }
};

// ---------------------------------------------------------------- json

inline nlohmann::json to_json(const VorticityProfile& F) {
    return std::visit(
        [](const auto& k) -> nlohmann::json {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, ConstantVorticity>) return {{"kind", "constant"}, {"c", k.c}};
            else if constexpr (std::is_same_v<T, AffineVorticity>) return {{"kind", "affine"}, {"a", k.a}, {"b", k.b}};
            else return {{"kind", "stuart"}, {"kappa", k.kappa}};
        },
        F.kind());
}

inline VorticityProfile vorticity_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return VorticityProfile::constant(j.value("c", 1.0));
    if (kind == "affine") return VorticityProfile::affine(j.at("a").get<double>(), j.value("b", 0.0));
    if (kind == "stuart") return VorticityProfile::stuart(j.value("kappa", 1.0));
    throw ConfigError("unknown vorticity kind '" + kind + "'");
}

inline nlohmann::json to_json(const BoundaryProfile& p) {
    auto modes = [](const std::vector<Mode>& ms) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& m : ms) a.push_back({m.k, m.amplitude});
        return a;
    };
    return {{"cos", modes(p.cosine_coeffs())}, {"sin", modes(p.sine_coeffs())}};
}

inline BoundaryProfile profile_from_json(const nlohmann::json& j) {
    auto modes = [&](const char* key) {
        std::vector<Mode> out;
        if (!j.contains(key)) return out;
        for (const auto& m : j.at(key)) {
            if (!m.is_array() || m.size() != 2) throw ConfigError(std::string("profile.") + key + " entries must be [k, amplitude]");
            out.push_back({m[0].get<int>(), m[1].get<double>()});
        }
        return out;
    };
    try {
        return BoundaryProfile(modes("cos"), modes("sin"));
    } catch (const GeometryError& e) {
        throw ConfigError(e.what());
    }
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
    return {
        {"profile", to_json(c.profile)},
        {"eps", c.eps},
        {"vorticity", to_json(c.vorticity)},
        {"gap", c.gap},
        {"matrix", {{"eps", c.matrix_eps}, {"gap", c.matrix_gap}, {"gap_vorticity", to_json(c.matrix_gap_vorticity)}}},
        {"grid", {{"nx", c.nx}, {"ny", c.ny}}},
        {"tolerances",
         {{"newton", c.newton_tol}, {"eigen", c.eigen_tol}, {"symmetry", c.symmetry_tol}, {"homology", c.homology_tol}}},
        {"newton_max_iterations", c.newton_max_iterations},
        {"centerline_samples", c.centerline_samples},
        {"carleman",
         {{"lambda", c.carleman.lambda},
          {"m", c.carleman.m},
          {"bumps", c.carleman.bumps},
          {"radius", c.carleman.radius},
          {"cutoff", c.carleman.cutoff}}},
        {"affine_slope_cap", c.affine_slope_cap},
        {"slope_check", c.slope_check == SlopeCheck::Warn ? "warn" : "error"},
        {"output", c.output},
        {"seed", c.seed},
        {"workers", c.workers},
    };
}

/// Missing keys keep their defaults; unknown top-level keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known = {"profile", "eps", "vorticity", "gap", "matrix", "grid", "tolerances", "newton_max_iterations",
                                                   "centerline_samples", "carleman", "affine_slope_cap", "slope_check", "output", "seed", "workers"};
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown config key '" + k + "'");

    ExperimentConfig c;
    try {
        if (j.contains("profile")) c.profile = profile_from_json(j["profile"]);
        if (j.contains("eps")) c.eps = j["eps"].get<std::vector<double>>();
        if (j.contains("vorticity")) c.vorticity = vorticity_from_json(j["vorticity"]);
        c.gap = j.value("gap", c.gap);
        if (j.contains("matrix")) {
            const auto& m = j["matrix"];
            c.matrix_eps = m.value("eps", c.matrix_eps);
            c.matrix_gap = m.value("gap", c.matrix_gap);
            if (m.contains("gap_vorticity")) c.matrix_gap_vorticity = vorticity_from_json(m["gap_vorticity"]);
        }
        if (j.contains("grid")) {
            c.nx = j["grid"].value("nx", c.nx);
            c.ny = j["grid"].value("ny", c.ny);
        }
        if (j.contains("tolerances")) {
            const auto& t = j["tolerances"];
            c.newton_tol = t.value("newton", c.newton_tol);
            c.eigen_tol = t.value("eigen", c.eigen_tol);
            c.symmetry_tol = t.value("symmetry", c.symmetry_tol);
            c.homology_tol = t.value("homology", c.homology_tol);
        }
        c.newton_max_iterations = j.value("newton_max_iterations", c.newton_max_iterations);
        c.centerline_samples = j.value("centerline_samples", c.centerline_samples);
        if (j.contains("carleman")) {
            const auto& k = j["carleman"];
            c.carleman.lambda = k.value("lambda", c.carleman.lambda);
            if (k.contains("m")) c.carleman.m = k["m"].get<std::vector<double>>();
            c.carleman.bumps = k.value("bumps", c.carleman.bumps);
            c.carleman.radius = k.value("radius", c.carleman.radius);
            c.carleman.cutoff = k.value("cutoff", c.carleman.cutoff);
        }
        c.affine_slope_cap = j.value("affine_slope_cap", c.affine_slope_cap);
        const std::string mode = j.value("slope_check", std::string("warn"));
        if (mode == "warn") c.slope_check = SlopeCheck::Warn;
        else if (mode == "error") c.slope_check = SlopeCheck::Error;
        else throw ConfigError("slope_check must be 'warn' or 'error'");
        c.output = j.value("output", c.output);
        c.seed = j.value("seed", c.seed);
        c.workers = j.value("workers", c.workers);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------- validation

/// Throws ConfigError on hard errors; returns warnings. Affine slopes are
/// checked against -lambda1 of each channel in the run (coarse 32x17
/// estimate) and against the upper cap; `slope_check` decides whether a
/// violation warns or fails.
inline std::vector<std::string> validate(const ExperimentConfig& c) {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be > 0");
    };
    positive(c.newton_tol, "tolerances.newton");
    positive(c.eigen_tol, "tolerances.eigen");
    positive(c.symmetry_tol, "tolerances.symmetry");
    positive(c.homology_tol, "tolerances.homology");
    positive(c.carleman.radius, "carleman.radius");
    positive(c.carleman.cutoff, "carleman.cutoff");
    if (c.newton_max_iterations < 1) throw ConfigError("newton_max_iterations must be >= 1");
    if (c.nx < 8) throw ConfigError("grid.nx must be >= 8");
    if (c.ny < 9 || c.ny % 2 == 0) throw ConfigError("grid.ny must be odd and >= 9 (a node row on the centerline)");
    if (c.workers < 1) throw ConfigError("workers must be >= 1");
    if (c.eps.empty()) throw ConfigError("eps list is empty");
    if (!(c.carleman.lambda >= 1.0)) throw ConfigError("carleman.lambda must be >= 1");
    if (c.carleman.m.empty()) throw ConfigError("carleman.m is empty");
    for (std::size_t k = 0; k < c.carleman.m.size(); ++k) {
        if (!(c.carleman.m[k] >= 1.0)) throw ConfigError("carleman.m values must be >= 1");
        if (k > 0 && !(c.carleman.m[k] > c.carleman.m[k - 1])) throw ConfigError("carleman.m must increase");
    }
    if (!std::isfinite(c.gap) || !std::isfinite(c.matrix_gap)) throw ConfigError("gap must be finite");

    std::vector<double> all_eps = c.eps;
    all_eps.push_back(c.matrix_eps);
    for (double e : all_eps) {
        if (!std::isfinite(e) || e < 0.0) throw ConfigError("eps values must be finite and >= 0");
        const BoundaryProfile h = c.profile.scaled(e);
        if (!(h.max_abs() < 1.0)) throw ConfigError("eps = " + std::to_string(e) + " violates |h| < 1 (max |h| = " + std::to_string(h.max_abs()) + ")");
    }

    std::vector<std::string> warnings;
    auto slope_issue = [&](const std::string& msg) {
        if (c.slope_check == SlopeCheck::Error) throw ConfigError(msg);
        warnings.push_back(msg);
    };
    for (const VorticityProfile* F : {&c.vorticity, &c.matrix_gap_vorticity}) {
        const auto* a = std::get_if<AffineVorticity>(&F->kind());
        if (!a) continue;
        if (a->a > c.affine_slope_cap)
            slope_issue("affine slope " + std::to_string(a->a) + " exceeds the cap " + std::to_string(c.affine_slope_cap));
        for (double e : all_eps) {
            const double l1 = smallest_dirichlet_eigenvalue(build_grid(c.profile.scaled(e), 32, 17)).lambda1;
            if (!F->slope_exceeds_minus_lambda1(l1))
                slope_issue("affine slope " + std::to_string(a->a) + " <= -lambda1 = " + std::to_string(-l1) + " at eps = " + std::to_string(e));
        }
    }
    return warnings;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return config_from_json(j);
}

}  // namespace cateye

// cateye: command-line front end for the channel-equilibrium experiments.
//
//   cateye <solve|eigen|topology|carleman|matrix|render> [--config f.json] [--out dir] [--workers n] [--seed n]
//
// Exit status: 0 all cells succeeded, 2 some cells failed, 1 bad config or usage.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "cateye/experiment.hpp"

namespace {

struct Common {
    std::string config;
    std::string out;
    std::optional<std::size_t> workers;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON experiment config (defaults apply when omitted)")->check(CLI::ExistingFile);
    sub->add_option("--out", c.out, "output directory (overrides config.output)");
    sub->add_option("--workers", c.workers, "parallel cells")->check(CLI::PositiveNumber);
    sub->add_option("--seed", c.seed, "random seed for test-function placement");
}

void report(const cateye::RunManifest& m, const std::filesystem::path& out) {
    for (const auto& w : m.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& c : m.cells)
        if (!c.ok) std::cerr << "cell " << c.name << " failed: " << c.error << "\n";
    std::cout << m.command << ": " << (m.cells.size() - m.failed()) << "/" << m.cells.size() << " cells ok, outputs in " << out.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Steady Euler equilibria on curved periodic channels: solves, topology, Carleman sweeps"};
    app.require_subcommand(1);
    Common common;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"solve", "solve at each eps; node tables (x, y, psi, u1, u2, omega)"},
        {"eigen", "smallest Dirichlet eigenvalue at each eps"},
        {"topology", "solve and classify streamline topology at each eps"},
        {"carleman", "Carleman ratio sweeps over bump test functions"},
        {"matrix", "2x2 matrix {flat, curved} x {gap 0, gap != 0}"},
        {"render", "SVG contour plots with island orbits at each eps"},
    };
    for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    cateye::ExperimentConfig cfg;
    try {
        if (!common.config.empty()) cfg = cateye::load_config(common.config);
        if (!common.out.empty()) cfg.output = common.out;
        if (common.workers) cfg.workers = *common.workers;
        if (common.seed) cfg.seed = *common.seed;
        (void)cateye::validate(cfg);  // fail fast; warnings are reported with the run
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }

    const std::filesystem::path out = cfg.output;
    cateye::RunManifest m;
    try {
        if (command == "solve") m = cateye::run_solve(cfg, out);
        else if (command == "eigen") m = cateye::run_eigen(cfg, out);
        else if (command == "topology") m = cateye::run_topology(cfg, out);
        else if (command == "carleman") m = cateye::run_carleman(cfg, out);
        else if (command == "matrix") m = cateye::run_island_matrix(cfg, out);
        else m = cateye::run_render(cfg, out);
        cateye::write_manifest(m, out);
    } catch (const cateye::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    report(m, out);
    return m.complete() ? 0 : 2;
}

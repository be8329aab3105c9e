// xmct: command-line front end of the experiment harness.
//
//   xmct --config desk.ini generate-data
//   xmct --config desk.ini train-prior [--resume]
//   xmct --config desk.ini train-xmodal [--resume]
//   xmct --config desk.ini reconstruct
//   xmct --config desk.ini evaluate
//   xmct --config desk.ini report
//
// Exit codes: 0 success, 1 user or configuration error, 2 runtime failure.
#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "xmct/errors.hpp"
#include "xmct/harness/commands.hpp"
#include "xmct/harness/config.hpp"

namespace {

constexpr int kUserError = 1;
constexpr int kRuntimeError = 2;

}  // namespace

int main(int argc, char** argv) {
    using namespace xmct;
    CLI::App app{"Cross-modal diffusion-guided sparse-view CT experiments"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::string out_dir;
    bool resume = false;
    app.add_option("--config", config_path, "Experiment config (INI)")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Override [experiment] seed");
    app.add_option("--workers", workers, "Override [experiment] workers")->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "Override [experiment] out");

    auto* gen = app.add_subcommand("generate-data", "Simulate train/test volumes and the paired dataset");
    auto* prior = app.add_subcommand("train-prior", "Train the diffusion prior");
    auto* xm = app.add_subcommand("train-xmodal", "Train the cross-modal translator");
    for (auto* s : {prior, xm}) s->add_flag("--resume", resume, "Continue from the existing checkpoint");
    auto* rec = app.add_subcommand("reconstruct", "Run the reconstruction sweep");
    auto* eval = app.add_subcommand("evaluate", "Compute per-slice metrics of finished cells");
    auto* rep = app.add_subcommand("report", "Write the comparison table and image dumps");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUserError;
    }

    try {
        harness::ExperimentConfig config =
            config_path.empty() ? harness::ExperimentConfig{} : harness::load_config(config_path);
        if (seed) config.seed = *seed;
        if (workers) config.workers = *workers;
        if (!out_dir.empty()) config.out_dir = out_dir;
        config.validate();

        if (gen->parsed()) harness::generate_data(config, std::cerr);
        if (prior->parsed()) harness::train_prior(config, resume, std::cerr);
        if (xm->parsed()) harness::train_xmodal(config, resume, std::cerr);
        if (rec->parsed()) {
            const auto summary = harness::reconstruct(config, std::cerr);
            std::cerr << "reconstruct: " << summary.cells - summary.failed << "/" << summary.cells << " cells succeeded\n";
            if (summary.failed > 0) return kRuntimeError;
        }
        if (eval->parsed()) harness::evaluate(config, std::cerr);
        if (rep->parsed()) harness::report(config, std::cerr);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUserError;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return kRuntimeError;
    }
    return 0;
}

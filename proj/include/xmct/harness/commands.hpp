#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "xmct/harness/config.hpp"

namespace xmct::harness {

// Output tree under config.out_dir:
//   config.ini                       canonical echo of the effective config
//   data/manifest.txt                one record per volume and per paired sample
//   data/{train,test}/vol_NNN_{main,aux}.xmgr
//   data/prior/slices.xmgr           prior training slices (f32)
//   data/paired/{degraded_main,degraded_aux,ideal_main}.xmgr (f32, one slice per sample)
//   models/prior.ckpt, models/prior_loss.csv
//   models/xmodal.ckpt, models/xmodal_loss.csv, models/xmodal_validation.csv
//   results/<cell>/{y_main.xmgr,recon.xmgr,trace.txt,metrics.csv} or FAILED
//   report/table.csv, report/table.md, report/images/*.pgm
struct Layout {
    std::filesystem::path root;

    std::filesystem::path data() const { return root / "data"; }
    std::filesystem::path manifest() const { return data() / "manifest.txt"; }
    std::filesystem::path volume(const std::string& split, int index, const std::string& modality) const;
    std::filesystem::path prior_slices() const { return data() / "prior" / "slices.xmgr"; }
    std::filesystem::path paired(const std::string& name) const { return data() / "paired" / (name + ".xmgr"); }
    std::filesystem::path models() const { return root / "models"; }
    std::filesystem::path prior_ckpt() const { return models() / "prior.ckpt"; }
    std::filesystem::path xmodal_ckpt() const { return models() / "xmodal.ckpt"; }
    std::filesystem::path results() const { return root / "results"; }
    std::filesystem::path report() const { return root / "report"; }
};

/// One reconstruction of the sweep.
struct Cell {
    int volume = 0;
    int views = 0;
    int steps = 0;
    double noise = 0.0;
    Mode mode = Mode::Unimodal;

    std::string name() const;
};

std::vector<Cell> sweep_cells(const ExperimentConfig& config);

/// Noise level as written in cell names and reports ("0", "0.05").
std::string format_noise(double noise);

/// Progress messages go to `log`; artifacts never contain timing information.
void generate_data(const ExperimentConfig& config, std::ostream& log);
void train_prior(const ExperimentConfig& config, bool resume, std::ostream& log);
void train_xmodal(const ExperimentConfig& config, bool resume, std::ostream& log);

struct SweepSummary {
    int cells = 0;
    int failed = 0;
};
/// Runs every sweep cell; a failing cell writes results/<cell>/FAILED and the sweep goes on.
SweepSummary reconstruct(const ExperimentConfig& config, std::ostream& log);
/// Per-cell metrics.csv against the test volumes plus results/metrics.csv over all cells.
void evaluate(const ExperimentConfig& config, std::ostream& log);
/// Table 1-style report from whatever results exist; missing or failed cells are marked.
void report(const ExperimentConfig& config, std::ostream& log);

/// Measurements of one cell: per slice forward projection plus seeded noise. Depends on
/// (volume, views, noise, seed) only, never on steps or mode.
std::vector<tomo::Sinogram> simulate_measurements(const GridVolume& main, const ExperimentConfig& config, int volume,
                                                  int views, double noise);
/// Degraded auxiliary volume of a test volume under the configured aux spec.
GridVolume auxiliary_volume(const GridVolume& aux, const ExperimentConfig& config, int volume);
/// Solver settings for a cell; both modes of a cell share the seed.
solver::SolverConfig cell_solver_config(const ExperimentConfig& config, const Cell& cell);

}  // namespace xmct::harness

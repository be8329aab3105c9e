#include "xmct/harness/commands.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "xmct/errors.hpp"
#include "xmct/io.hpp"
#include "xmct/metrics.hpp"
#include "xmct/rng.hpp"

namespace xmct::harness {

namespace fs = std::filesystem;

namespace {

enum Stream : std::uint64_t {
    kTrainVolume = 11,
    kTestVolume = 12,
    kPriorSlice = 13,
    kPaired = 14,
    kPriorInit = 15,
    kPriorTrain = 16,
    kXmodalInit = 17,
    kXmodalTrain = 18,
    kMeasure = 19,
    kAux = 20,
    kSolver = 21,
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::uint64_t noise_key(double noise) { return std::bit_cast<std::uint64_t>(noise); }

void require_file(const fs::path& p, const char* hint) {
    if (!fs::exists(p)) throw ConfigError("required input not found: " + p.string() + " (" + hint + ")");
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string spec_fields(const char* prefix, const degrade::DegradationSpec& s) {
    std::ostringstream os;
    os << prefix << "_views=" << s.num_views << ' ' << prefix << "_noise=" << format_noise(s.noise_relative_sigma) << ' '
       << prefix << "_blur=" << format_noise(s.blur_sigma) << ' ' << prefix << "_keep=" << format_noise(s.sampling_keep_fraction)
       << ' ' << prefix << "_seed=" << s.seed;
    return os.str();
}

GridVolume stack(const std::vector<degrade::PairedSample>& ds, GridImage degrade::PairedSample::*member) {
    std::vector<GridImage> v;
    v.reserve(ds.size());
    for (const auto& s : ds) v.push_back(s.*member);
    return GridVolume(std::move(v));
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Loss-curve CSV rows of an earlier run that a resumed run keeps.
std::string kept_rows(const fs::path& csv, std::int64_t before_step) {
    if (!fs::exists(csv)) return {};
    std::istringstream in(read_text(csv));
    std::string line, out;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        if (std::stoll(line.substr(0, comma)) < before_step) out += line + "\n";
    }
    return out;
}

std::string loss_rows(const std::vector<double>& losses, std::int64_t first_step) {
    std::string out;
    for (std::size_t i = 0; i < losses.size(); ++i)
        out += std::to_string(first_step + static_cast<std::int64_t>(i)) + "," + fmt("%.9g", losses[i]) + "\n";
    return out;
}

struct PairedSplit {
    std::vector<degrade::PairedSample> train;
    std::vector<degrade::PairedSample> validation;
};

PairedSplit load_paired(const ExperimentConfig& config, const Layout& layout) {
    for (const char* n : {"degraded_main", "degraded_aux", "ideal_main"})
        require_file(layout.paired(n), "run generate-data first");
    const auto dm = io::read_grid(layout.paired("degraded_main"));
    const auto da = io::read_grid(layout.paired("degraded_aux"));
    const auto im = io::read_grid(layout.paired("ideal_main"));
    if (dm.depth() != da.depth() || dm.depth() != im.depth())
        throw IoError("paired dataset files disagree on the sample count");
    const int n = dm.depth();
    const int n_val = static_cast<int>(std::lround(config.validation_fraction * n));
    PairedSplit split;
    for (int i = 0; i < n; ++i) {
        degrade::PairedSample s;
        s.degraded_main = dm[static_cast<std::size_t>(i)];
        s.degraded_aux = da[static_cast<std::size_t>(i)];
        s.ideal_main = im[static_cast<std::size_t>(i)];
        (i < n - n_val ? split.train : split.validation).push_back(std::move(s));
    }
    return split;
}

void write_cell_info(const fs::path& dir, const Cell& c) {
    std::ostringstream os;
    os << "volume=" << c.volume << "\nviews=" << c.views << "\nsteps=" << c.steps << "\nnoise=" << format_noise(c.noise)
       << "\nmode=" << mode_name(c.mode) << "\n";
    io::write_text_atomic(dir / "cell.txt", os.str());
}

Cell read_cell_info(const fs::path& dir) {
    std::istringstream in(read_text(dir / "cell.txt"));
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line))
        if (const auto eq = line.find('='); eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    for (const char* k : {"volume", "views", "steps", "noise", "mode"})
        if (!kv.count(k)) throw IoError((dir / "cell.txt").string() + ": missing field " + k);
    Cell c;
    c.volume = std::stoi(kv["volume"]);
    c.views = std::stoi(kv["views"]);
    c.steps = std::stoi(kv["steps"]);
    c.noise = std::stod(kv["noise"]);
    c.mode = kv["mode"] == "crossmodal" ? Mode::Crossmodal : Mode::Unimodal;
    return c;
}

std::vector<fs::path> cell_dirs(const Layout& layout) {
    std::vector<fs::path> dirs;
    if (!fs::exists(layout.results())) return dirs;
    for (const auto& e : fs::directory_iterator(layout.results()))
        if (e.is_directory() && fs::exists(e.path() / "cell.txt")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

int dump_index(const ExperimentConfig& config, int depth) {
    return config.dump_slice >= 0 ? std::min(config.dump_slice, depth - 1) : depth / 2;
}

}  // namespace

fs::path Layout::volume(const std::string& split, int index, const std::string& modality) const {
    char name[64];
    std::snprintf(name, sizeof name, "vol_%03d_%s.xmgr", index, modality.c_str());
    return data() / split / name;
}

std::string format_noise(double noise) { return fmt("%.6g", noise); }

std::string Cell::name() const {
    char buf[128];
    std::snprintf(buf, sizeof buf, "vol%03d_views%04d_steps%03d_noise%s_%s", volume, views, steps,
                  format_noise(noise).c_str(), mode_name(mode));
    return buf;
}

std::vector<Cell> sweep_cells(const ExperimentConfig& config) {
    std::vector<Cell> cells;
    for (int v = 0; v < config.test_volumes; ++v)
        for (double n : config.sweep_noise)
            for (int s : config.sweep_steps)
                for (int views : config.sweep_views)
                    for (Mode m : config.sweep_modes) cells.push_back({v, views, s, n, m});
    return cells;
}

std::vector<tomo::Sinogram> simulate_measurements(const GridVolume& main, const ExperimentConfig& config, int volume,
                                                  int views, double noise) {
    const auto geom = tomo::make_parallel_geometry(main.width(), views, config.pixel_pitch);
    const std::uint64_t base = mix_seed(mix_seed(config.seed, kMeasure, static_cast<std::uint64_t>(volume)),
                                        static_cast<std::uint64_t>(views), noise_key(noise));
    std::vector<tomo::Sinogram> y(static_cast<std::size_t>(main.depth()));
#pragma omp parallel for schedule(static)
    for (int s = 0; s < main.depth(); ++s)
        y[static_cast<std::size_t>(s)] = tomo::add_noise(tomo::forward_project(main[static_cast<std::size_t>(s)], geom), noise,
                                                         mix_seed(base, static_cast<std::uint64_t>(s)));
    return y;
}

GridVolume auxiliary_volume(const GridVolume& aux, const ExperimentConfig& config, int volume) {
    const std::uint64_t base = mix_seed(config.seed, kAux, static_cast<std::uint64_t>(volume));
    std::vector<GridImage> out(static_cast<std::size_t>(aux.depth()));
#pragma omp parallel for schedule(static)
    for (int s = 0; s < aux.depth(); ++s) {
        degrade::DegradationSpec spec = config.aux_spec;
        spec.seed = mix_seed(base, static_cast<std::uint64_t>(s));
        out[static_cast<std::size_t>(s)] = degrade::degraded_reconstruction(aux[static_cast<std::size_t>(s)], spec);
    }
    return GridVolume(std::move(out));
}

solver::SolverConfig cell_solver_config(const ExperimentConfig& config, const Cell& cell) {
    solver::SolverConfig s = config.solver;
    s.num_adapt_steps = cell.steps;
    s.crossmodal_enabled = cell.mode == Mode::Crossmodal;
    s.seed = mix_seed(mix_seed(config.seed, kSolver, static_cast<std::uint64_t>(cell.volume)),
                      static_cast<std::uint64_t>(cell.views), noise_key(cell.noise));
    return s;
}

void generate_data(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    const Layout layout{config.out_dir};
    const auto t0 = std::chrono::steady_clock::now();
    io::write_text_atomic(layout.root / "config.ini", to_ini(config));
    std::ostringstream manifest;
    manifest << "# xmct dataset manifest v1\n";
    manifest << "recipe side=" << config.recipe.volume_side << " depth=" << config.recipe.depth << " seed=" << config.seed
             << "\n";

    std::vector<GridVolume> train_main;
    for (const auto& [split, count, stream] :
         {std::tuple{"train", config.train_volumes, kTrainVolume}, std::tuple{"test", config.test_volumes, kTestVolume}}) {
        for (int k = 0; k < count; ++k) {
            const std::uint64_t seed = mix_seed(config.seed, stream, static_cast<std::uint64_t>(k));
            auto pv = phantoms::generate_paired_volume(config.recipe, seed);
            io::write_grid(layout.volume(split, k, "main"), pv.main);
            io::write_grid(layout.volume(split, k, "aux"), pv.aux);
            manifest << "volume split=" << split << " index=" << k << " seed=" << seed << " ellipsoids="
                     << pv.ellipsoids.size() << " main=" << fs::relative(layout.volume(split, k, "main"), layout.data()).string()
                     << " aux=" << fs::relative(layout.volume(split, k, "aux"), layout.data()).string() << "\n";
            if (std::string(split) == "train") train_main.push_back(std::move(pv.main));
        }
    }
    log << "volumes: " << config.train_volumes << " train, " << config.test_volumes << " test\n";

    if (config.prior_slices > 0) {
        std::vector<GridImage> slices(static_cast<std::size_t>(config.prior_slices));
#pragma omp parallel for schedule(static)
        for (int i = 0; i < config.prior_slices; ++i)
            slices[static_cast<std::size_t>(i)] =
                phantoms::sample_prior_slice(config.recipe, mix_seed(config.seed, kPriorSlice, static_cast<std::uint64_t>(i)));
        io::write_grid(layout.prior_slices(), GridVolume(std::move(slices)), io::DType::F32);
        manifest << "prior count=" << config.prior_slices
                 << " file=" << fs::relative(layout.prior_slices(), layout.data()).string() << "\n";
    }

    if (config.paired_count > 0) {
        std::vector<GridVolume> train_aux;
        for (int k = 0; k < config.train_volumes; ++k) train_aux.push_back(io::read_grid(layout.volume("train", k, "aux")));
        const degrade::SliceSource source = [&](std::uint64_t s) {
            Rng pick(s);
            const int v = pick.integer(0, config.train_volumes - 1);
            const int z = pick.integer(0, config.recipe.depth - 1);
            return std::pair{train_main[static_cast<std::size_t>(v)][static_cast<std::size_t>(z)],
                             train_aux[static_cast<std::size_t>(v)][static_cast<std::size_t>(z)]};
        };
        const auto ds = degrade::build_paired_dataset(config.recipe, config.ideal_spec(), config.spec_grid(),
                                                      config.paired_count, mix_seed(config.seed, kPaired), source);
        io::write_grid(layout.paired("degraded_main"), stack(ds, &degrade::PairedSample::degraded_main), io::DType::F32);
        io::write_grid(layout.paired("degraded_aux"), stack(ds, &degrade::PairedSample::degraded_aux), io::DType::F32);
        io::write_grid(layout.paired("ideal_main"), stack(ds, &degrade::PairedSample::ideal_main), io::DType::F32);
        const int n_val = static_cast<int>(std::lround(config.validation_fraction * config.paired_count));
        for (int i = 0; i < config.paired_count; ++i) {
            const auto& s = ds[static_cast<std::size_t>(i)];
            manifest << "paired index=" << i << " split=" << (i < config.paired_count - n_val ? "train" : "validation") << ' '
                     << spec_fields("main", s.spec_main) << ' ' << spec_fields("aux", s.spec_aux) << "\n";
        }
        log << "paired samples: " << config.paired_count << " (" << n_val << " validation)\n";
    }
    io::write_text_atomic(layout.manifest(), manifest.str());
    log << "generate-data finished in " << fmt("%.1f", elapsed(t0)) << " s\n";
}

void train_prior(const ExperimentConfig& config, bool resume, std::ostream& log) {
    config.validate();
    const Layout layout{config.out_dir};
    require_file(layout.prior_slices(), "run generate-data with prior_slices > 0 first");
    const auto t0 = std::chrono::steady_clock::now();
    const auto slices = io::read_grid(layout.prior_slices());
    const auto sched = config.schedule();

    diffusion::DenoiserParams init = diffusion::init_denoiser(config.prior_arch(), mix_seed(config.seed, kPriorInit));
    std::vector<float> state;
    std::int64_t start = 0;
    const fs::path csv = layout.models() / "prior_loss.csv";
    std::string earlier;
    if (resume && fs::exists(layout.prior_ckpt())) {
        auto ck = io::read_denoiser(layout.prior_ckpt());
        if (!(ck.params.arch == init.arch)) throw ConfigError("train-prior --resume: checkpoint architecture differs from [prior]");
        init = std::move(ck.params);
        state = std::move(ck.optimizer_state);
        start = ck.trained_steps;
        earlier = kept_rows(csv, start);
        log << "resuming prior training at step " << start << "\n";
    }

    diffusion::TrainConfig tc;
    tc.epochs = config.prior.epochs;
    tc.batch = config.prior.batch;
    tc.optimizer = config.prior.optimizer;
    tc.seed = mix_seed(config.seed, kPriorTrain);
    tc.start_step = start;
    diffusion::TrainResult r;
    try {
        r = diffusion::train_denoiser(slices.slices, sched, std::move(init), tc, std::move(state));
    } catch (const diffusion::TrainingError& e) {
        io::write_denoiser(layout.models() / "prior.lastfinite.ckpt", {e.last_finite(), sched, e.step(), {}});
        throw;
    }
    io::write_denoiser(layout.prior_ckpt(), {r.params, sched, r.steps_taken, r.optimizer_state});
    io::write_text_atomic(csv, "step,loss\n" + earlier + loss_rows(r.step_losses, start));
    log << "train-prior: " << r.steps_taken << " steps";
    if (!r.step_losses.empty()) log << ", final loss " << fmt("%.5f", r.step_losses.back());
    log << " (" << fmt("%.1f", elapsed(t0)) << " s)\n";
}

void train_xmodal(const ExperimentConfig& config, bool resume, std::ostream& log) {
    config.validate();
    const Layout layout{config.out_dir};
    const auto t0 = std::chrono::steady_clock::now();
    const auto split = load_paired(config, layout);
    if (split.train.empty()) throw ConfigError("train-xmodal: the paired training split is empty");

    auto init = xmodal::init_translation(config.recipe.volume_side, config.xmodal.base_channels,
                                         mix_seed(config.seed, kXmodalInit));
    std::vector<float> state;
    std::int64_t start = 0;
    const fs::path csv = layout.models() / "xmodal_loss.csv";
    std::string earlier;
    if (resume && fs::exists(layout.xmodal_ckpt())) {
        auto ck = io::read_translator(layout.xmodal_ckpt());
        if (!(ck.model.arch == init.arch)) throw ConfigError("train-xmodal --resume: checkpoint architecture differs from [xmodal]");
        init = std::move(ck.model);
        state = std::move(ck.optimizer_state);
        start = init.trained_steps;
        earlier = kept_rows(csv, start);
        log << "resuming translator training at step " << start << "\n";
    }

    xmodal::TranslationTrainConfig tc;
    tc.epochs = config.xmodal.epochs;
    tc.batch = config.xmodal.batch;
    tc.optimizer = config.xmodal.optimizer;
    tc.adversarial_weight = config.xmodal.adversarial_weight;
    tc.discriminator_channels = config.xmodal.discriminator_channels;
    tc.seed = mix_seed(config.seed, kXmodalTrain);
    tc.start_step = start;
    xmodal::TranslationTrainResult r;
    try {
        r = xmodal::train_translation(split.train, std::move(init), tc, std::move(state));
    } catch (const xmodal::TranslationTrainingError& e) {
        io::write_translator(layout.models() / "xmodal.lastfinite.ckpt", {e.last_finite(), {}});
        throw;
    }
    io::write_translator(layout.xmodal_ckpt(), {r.model, r.optimizer_state});
    io::write_text_atomic(csv, "step,loss\n" + earlier + loss_rows(r.step_losses, start));

    std::string val = "index,input_psnr,output_psnr\n";
    int improved = 0;
    double in_sum = 0.0, out_sum = 0.0;
    for (std::size_t i = 0; i < split.validation.size(); ++i) {
        const auto& s = split.validation[i];
        const double pin = metrics::psnr(s.degraded_main, s.ideal_main);
        const double pout = metrics::psnr(xmodal::apply_translation(r.model, s.degraded_main, s.degraded_aux), s.ideal_main);
        val += std::to_string(i) + "," + fmt("%.6f", pin) + "," + fmt("%.6f", pout) + "\n";
        improved += pout > pin;
        in_sum += pin;
        out_sum += pout;
    }
    io::write_text_atomic(layout.models() / "xmodal_validation.csv", val);
    log << "train-xmodal: " << r.model.trained_steps << " steps";
    if (!r.step_losses.empty()) log << ", final MAE " << fmt("%.5f", r.step_losses.back());
    if (!split.validation.empty()) {
        const double n = static_cast<double>(split.validation.size());
        log << "; validation improved " << improved << "/" << split.validation.size() << ", mean PSNR "
            << fmt("%.3f", in_sum / n) << " -> " << fmt("%.3f", out_sum / n);
    }
    log << " (" << fmt("%.1f", elapsed(t0)) << " s)\n";
}

SweepSummary reconstruct(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    const Layout layout{config.out_dir};
    const auto cells = sweep_cells(config);
    const bool need_xmodal = std::any_of(cells.begin(), cells.end(), [](const Cell& c) { return c.mode == Mode::Crossmodal; });
    require_file(layout.prior_ckpt(), "run train-prior first");
    if (need_xmodal) require_file(layout.xmodal_ckpt(), "run train-xmodal first");
    for (int v = 0; v < config.test_volumes; ++v) {
        require_file(layout.volume("test", v, "main"), "run generate-data first");
        require_file(layout.volume("test", v, "aux"), "run generate-data first");
    }

    const auto prior = io::read_denoiser(layout.prior_ckpt());
    if (static_cast<int>(prior.params.arch.image_side) != config.recipe.volume_side)
        throw ConfigError("prior checkpoint resolution does not match [phantom] side");
    xmodal::TranslationModel translator;
    if (need_xmodal) translator = io::read_translator(layout.xmodal_ckpt()).model;

    // a volume that fails to load fails only its own cells
    std::vector<GridVolume> truth(static_cast<std::size_t>(config.test_volumes)), aux(truth.size());
    std::vector<std::string> load_error(truth.size());
    for (int v = 0; v < config.test_volumes; ++v) {
        try {
            truth[static_cast<std::size_t>(v)] = io::read_grid(layout.volume("test", v, "main"));
            aux[static_cast<std::size_t>(v)] = auxiliary_volume(io::read_grid(layout.volume("test", v, "aux")), config, v);
        } catch (const IoError& e) {
            load_error[static_cast<std::size_t>(v)] = e.what();
        }
    }

    std::mutex log_mutex;
    std::atomic<int> next{0}, failed{0};
    auto work = [&] {
        for (int i = next++; i < static_cast<int>(cells.size()); i = next++) {
            const Cell& cell = cells[static_cast<std::size_t>(i)];
            const fs::path dir = layout.results() / cell.name();
            const auto t0 = std::chrono::steady_clock::now();
            std::string msg;
            try {
                fs::remove_all(dir);
                fs::create_directories(dir);
                write_cell_info(dir, cell);
                if (!load_error[static_cast<std::size_t>(cell.volume)].empty())
                    throw IoError(load_error[static_cast<std::size_t>(cell.volume)]);
                const auto& gt = truth[static_cast<std::size_t>(cell.volume)];
                solver::Problem problem;
                problem.y_main = simulate_measurements(gt, config, cell.volume, cell.views, cell.noise);
                problem.geometry = problem.y_main.front().geometry;
                problem.schedule = prior.schedule;
                problem.ground_truth = &gt;
                std::vector<GridImage> sino_slices;
                for (const auto& y : problem.y_main) {
                    GridImage img(y.geometry.num_detector_bins, y.geometry.num_angles());
                    img.values = y.values;
                    sino_slices.push_back(std::move(img));
                }
                io::write_grid(dir / "y_main.xmgr", GridVolume(std::move(sino_slices)));

                const auto sc = cell_solver_config(config, cell);
                solver::SolverState state;
                const auto recon = solver::reconstruct(problem, &aux[static_cast<std::size_t>(cell.volume)], prior.params, sc,
                                                       cell.mode == Mode::Crossmodal ? &translator : nullptr, &state);
                std::ostringstream trace;
                io::write_trace(trace, state.trace);
                io::write_text_atomic(dir / "trace.txt", trace.str());
                io::write_grid(dir / "recon.xmgr", recon);
                msg = cell.name() + " ok (final PSNR " + fmt("%.2f", state.trace.back().psnr) + " dB, " +
                      fmt("%.1f", elapsed(t0)) + " s)";
            } catch (const std::exception& e) {
                ++failed;
                msg = cell.name() + " FAILED: " + e.what();
                try {
                    fs::create_directories(dir);
                    io::write_text_atomic(dir / "FAILED", std::string(e.what()) + "\n");
                    fs::remove(dir / "recon.xmgr");
                } catch (const std::exception&) {
                }
            }
            const std::lock_guard lock(log_mutex);
            log << "[" << i + 1 << "/" << cells.size() << "] " << msg << "\n" << std::flush;
        }
    };
    const int nthreads = std::max(1, std::min<int>(config.workers, static_cast<int>(cells.size())));
    if (nthreads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < nthreads; ++k) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    return {static_cast<int>(cells.size()), failed.load()};
}

void evaluate(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    const Layout layout{config.out_dir};
    std::map<int, GridVolume> truth;
    std::string all = std::string(metrics::kSliceCsvHeader) + "\n";
    int evaluated = 0;
    for (const auto& dir : cell_dirs(layout)) {
        if (!fs::exists(dir / "recon.xmgr")) continue;
        const Cell cell = read_cell_info(dir);
        if (!truth.count(cell.volume)) {
            const auto p = layout.volume("test", cell.volume, "main");
            require_file(p, "test volume of an existing result");
            truth[cell.volume] = io::read_grid(p);
        }
        auto rep = metrics::evaluate_volume(io::read_grid(dir / "recon.xmgr"), truth[cell.volume]);
        char vol[32];
        std::snprintf(vol, sizeof vol, "test_%03d", cell.volume);
        rep.volume = vol;
        rep.views = cell.views;
        rep.steps = cell.steps;
        rep.noise = cell.noise;
        rep.mode = mode_name(cell.mode);
        std::ostringstream rows;
        metrics::write_slice_rows(rows, rep);
        io::write_text_atomic(dir / "metrics.csv", std::string(metrics::kSliceCsvHeader) + "\n" + rows.str());
        all += rows.str();
        ++evaluated;
    }
    io::write_text_atomic(layout.results() / "metrics.csv", all);
    log << "evaluate: " << evaluated << " cells\n";
}

void report(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    const Layout layout{config.out_dir};

    struct Entry {
        std::map<int, std::pair<double, double>> ok;  // volume -> (mean psnr, mean ssim)
        std::vector<int> failed;
        std::map<int, fs::path> recon;
    };
    using Key = std::tuple<double, int, int>;  // noise, steps, views
    std::map<Key, std::map<Mode, Entry>> table;

    for (const auto& dir : cell_dirs(layout)) {
        const Cell cell = read_cell_info(dir);
        Entry& e = table[{cell.noise, cell.steps, cell.views}][cell.mode];
        if (fs::exists(dir / "FAILED")) {
            e.failed.push_back(cell.volume);
            continue;
        }
        if (!fs::exists(dir / "metrics.csv")) continue;  // not evaluated: reported as missing
        std::istringstream in(read_text(dir / "metrics.csv"));
        std::string line;
        std::getline(in, line);
        double ps = 0.0, ss = 0.0;
        int n = 0;
        while (std::getline(in, line)) {
            std::vector<std::string> f;
            std::stringstream ls(line);
            std::string x;
            while (std::getline(ls, x, ',')) f.push_back(x);
            if (f.size() != 8) throw IoError((dir / "metrics.csv").string() + ": malformed row");
            ps += std::stod(f[6]);
            ss += std::stod(f[7]);
            ++n;
        }
        if (n == 0) continue;
        e.ok[cell.volume] = {ps / n, ss / n};
        if (fs::exists(dir / "recon.xmgr")) e.recon[cell.volume] = dir / "recon.xmgr";
    }

    const int expected = config.test_volumes;
    auto round4 = [](double v) { return std::round(v * 1e4) / 1e4; };
    auto status = [&](const Entry* e) -> std::string {
        if (e == nullptr) return "missing";
        const int have = static_cast<int>(e->ok.size());
        if (have == expected) return "ok";
        if (!e->failed.empty()) return "failed " + std::to_string(e->failed.size()) + "/" + std::to_string(expected);
        return "missing " + std::to_string(expected - have) + "/" + std::to_string(expected);
    };
    auto means = [&](const Entry& e) {
        double p = 0.0, s = 0.0;
        for (const auto& [v, m] : e.ok) {
            p += m.first;
            s += m.second;
        }
        const double n = static_cast<double>(e.ok.size());
        return std::pair{round4(p / n), round4(s / n)};
    };

    std::string csv = "noise,steps,views,uni_psnr,uni_ssim,cross_psnr,cross_ssim,delta_psnr,delta_ssim,uni_status,cross_status\n";
    std::string md =
        "| Noise | Steps | #Views | Unimodal PSNR / SSIM | Cross-modal PSNR / SSIM | Δ PSNR / SSIM |\n"
        "|---|---|---|---|---|---|\n";
    for (const auto& [key, modes] : table) {
        const auto& [noise, steps, views] = key;
        const Entry* uni = modes.count(Mode::Unimodal) ? &modes.at(Mode::Unimodal) : nullptr;
        const Entry* cross = modes.count(Mode::Crossmodal) ? &modes.at(Mode::Crossmodal) : nullptr;
        const std::string su = status(uni), sx = status(cross);
        std::string cu = ",", cx = ",", cd = ",", mu = su, mx = sx, mdl = "n/a";
        std::pair<double, double> u{}, x{};
        if (su == "ok") {
            u = means(*uni);
            cu = fmt("%.4f", u.first) + "," + fmt("%.4f", u.second);
            mu = fmt("%.2f", u.first) + " / " + fmt("%.4f", u.second);
        }
        if (sx == "ok") {
            x = means(*cross);
            cx = fmt("%.4f", x.first) + "," + fmt("%.4f", x.second);
            mx = fmt("%.2f", x.first) + " / " + fmt("%.4f", x.second);
        }
        if (su == "ok" && sx == "ok") {
            const double dp = x.first - u.first, ds = x.second - u.second;
            cd = fmt("%.4f", dp) + "," + fmt("%.4f", ds);
            // markdown shows PSNR at two decimals; its delta is taken from the rounded values
            const double dp2 = std::round(x.first * 100.0) / 100.0 - std::round(u.first * 100.0) / 100.0;
            mdl = fmt("%+.2f", dp2) + " / " + fmt("%+.4f", ds);
        }
        csv += format_noise(noise) + "," + std::to_string(steps) + "," + std::to_string(views) + "," + cu + "," + cx + "," + cd +
               "," + su + "," + sx + "\n";
        md += "| " + format_noise(noise) + " | " + std::to_string(steps) + " | " + std::to_string(views) + " | " + mu + " | " +
              mx + " | " + mdl + " |\n";

        // Triptych of the first volume reconstructed in both modes: unimodal | cross-modal | truth.
        if (uni && cross) {
            for (const auto& [v, path] : uni->recon) {
                if (!cross->recon.count(v)) continue;
                const auto ru = io::read_grid(path), rx = io::read_grid(cross->recon.at(v));
                const auto gt = io::read_grid(layout.volume("test", v, "main"));
                const int z = dump_index(config, gt.depth());
                const int side = gt.width(), gap = 2;
                GridImage trip(3 * side + 2 * gap, side, 1.0);
                const GridImage* panels[3] = {&ru[static_cast<std::size_t>(z)], &rx[static_cast<std::size_t>(z)],
                                              &gt[static_cast<std::size_t>(z)]};
                for (int p = 0; p < 3; ++p)
                    for (int r = 0; r < side; ++r)
                        for (int c = 0; c < side; ++c) trip.at(r, p * (side + gap) + c) = panels[p]->at(r, c);
                char name[128];
                std::snprintf(name, sizeof name, "noise%s_steps%03d_views%04d_vol%03d_slice%03d.pgm",
                              format_noise(noise).c_str(), steps, views, v, z);
                io::write_pgm(layout.report() / "images" / name, trip);
                break;
            }
        }
    }
    md += "\nValues are volume-averaged means of per-slice PSNR [dB] and SSIM over " + std::to_string(expected) +
          " test volume(s). Δ = Cross − Uni. Images: unimodal | cross-modal | ground truth.\n";
    io::write_text_atomic(layout.report() / "table.csv", csv);
    io::write_text_atomic(layout.report() / "table.md", md);
    log << "report: " << table.size() << " rows -> " << (layout.report() / "table.md").string() << "\n";
}

}  // namespace xmct::harness

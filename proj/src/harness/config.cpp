#include "xmct/harness/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "xmct/errors.hpp"

namespace xmct::harness {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

// Thrown by value parsers; the caller prefixes the location.
struct BadValue {
    std::string reason;
};

template <class T>
T parse_number(const std::string& s, const char* what) {
    T v{};
    const auto* end = s.data() + s.size();
    const auto [p, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc{} || p != end) throw BadValue{"expected " + std::string(what) + ", got '" + s + "'"};
    return v;
}

int parse_int(const std::string& s) { return parse_number<int>(s, "an integer"); }
std::uint64_t parse_u64(const std::string& s) { return parse_number<std::uint64_t>(s, "a non-negative integer"); }
double parse_real(const std::string& s) {
    const double v = parse_number<double>(s, "a real number");
    if (!std::isfinite(v)) throw BadValue{"expected a finite real number, got '" + s + "'"};
    return v;
}

template <class T, class F>
std::vector<T> parse_list(const std::string& s, F item) {
    std::vector<T> out;
    for (const auto& x : split_list(s)) out.push_back(item(x));
    if (out.empty()) throw BadValue{"expected a non-empty comma-separated list"};
    return out;
}

std::string fmt_real(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

template <class T, class F>
std::string fmt_list(const std::vector<T>& v, F f) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + f(v[i]);
    return out;
}

Mode parse_mode(const std::string& s) {
    if (s == "unimodal") return Mode::Unimodal;
    if (s == "crossmodal") return Mode::Crossmodal;
    throw BadValue{"expected 'unimodal' or 'crossmodal', got '" + s + "'"};
}

diffusion::OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "sgd") return diffusion::OptimizerKind::Sgd;
    if (s == "adam") return diffusion::OptimizerKind::Adam;
    throw BadValue{"expected 'sgd' or 'adam', got '" + s + "'"};
}

struct Field {
    std::string key;
    std::function<void(const std::string&)> parse;
    std::function<std::string()> render;
};

using Table = std::vector<std::pair<std::string, std::vector<Field>>>;

Field int_field(std::string key, int& f) {
    return {std::move(key), [&f](const std::string& s) { f = parse_int(s); }, [&f] { return std::to_string(f); }};
}
Field u64_field(std::string key, std::uint64_t& f) {
    return {std::move(key), [&f](const std::string& s) { f = parse_u64(s); }, [&f] { return std::to_string(f); }};
}
Field real_field(std::string key, double& f) {
    return {std::move(key), [&f](const std::string& s) { f = parse_real(s); }, [&f] { return fmt_real(f); }};
}
Field ints_field(std::string key, std::vector<int>& f) {
    return {std::move(key), [&f](const std::string& s) { f = parse_list<int>(s, parse_int); },
            [&f] { return fmt_list(f, [](int v) { return std::to_string(v); }); }};
}
Field reals_field(std::string key, std::vector<double>& f) {
    return {std::move(key), [&f](const std::string& s) { f = parse_list<double>(s, parse_real); },
            [&f] { return fmt_list(f, fmt_real); }};
}

void training_fields(std::vector<Field>& out, ModelTraining& m, bool prior) {
    out.push_back(int_field("base_channels", m.base_channels));
    if (prior) out.push_back(int_field("time_embed_dim", m.time_embed_dim));
    out.push_back(int_field("epochs", m.epochs));
    out.push_back(int_field("batch", m.batch));
    out.push_back({"optimizer", [&m](const std::string& s) { m.optimizer.kind = parse_optimizer(s); },
                   [&m] { return std::string(m.optimizer.kind == diffusion::OptimizerKind::Adam ? "adam" : "sgd"); }});
    out.push_back(real_field("lr", m.optimizer.lr));
    out.push_back(real_field("momentum", m.optimizer.momentum));
    out.push_back(real_field("beta2", m.optimizer.beta2));
    out.push_back(real_field("max_grad_norm", m.optimizer.max_grad_norm));
    if (!prior) {
        out.push_back(real_field("adversarial_weight", m.adversarial_weight));
        out.push_back(int_field("discriminator_channels", m.discriminator_channels));
    }
}

// One binding table drives both parsing and rendering, so the two cannot drift apart.
Table bind(ExperimentConfig& c) {
    auto& r = c.recipe;
    Table t;
    t.push_back({"experiment",
                 {u64_field("seed", c.seed),
                  {"out", [&c](const std::string& s) {
                       if (s.empty()) throw BadValue{"expected a directory path"};
                       c.out_dir = s;
                   },
                   [&c] { return c.out_dir.string(); }},
                  int_field("workers", c.workers), int_field("train_volumes", c.train_volumes),
                  int_field("test_volumes", c.test_volumes)}});
    t.push_back({"phantom",
                 {int_field("side", r.volume_side), int_field("depth", r.depth), int_field("count_min", r.ellipse_count_min),
                  int_field("count_max", r.ellipse_count_max), real_field("semi_axis_min", r.semi_axis.lo),
                  real_field("semi_axis_max", r.semi_axis.hi), real_field("depth_semi_axis_min", r.depth_semi_axis.lo),
                  real_field("depth_semi_axis_max", r.depth_semi_axis.hi),
                  real_field("attenuation_main_min", r.attenuation_main.lo),
                  real_field("attenuation_main_max", r.attenuation_main.hi),
                  real_field("attenuation_aux_min", r.attenuation_aux.lo),
                  real_field("attenuation_aux_max", r.attenuation_aux.hi), real_field("aux_correlation", r.aux_correlation),
                  real_field("main_only_fraction", r.main_only_fraction),
                  real_field("aux_only_fraction", r.aux_only_fraction), real_field("gate_ssim_min", r.gate_ssim.lo),
                  real_field("gate_ssim_max", r.gate_ssim.hi), int_field("gate_attempts", r.gate_attempts),
                  int_field("prior_slices", c.prior_slices)}});
    t.push_back({"geometry", {real_field("pixel_pitch", c.pixel_pitch)}});
    t.push_back({"degrade",
                 {int_field("ideal_views", c.ideal_views), ints_field("main_views", c.main_views),
                  reals_field("main_noise", c.main_noise), reals_field("main_blur", c.main_blur),
                  reals_field("main_keep", c.main_keep), ints_field("aux_views", c.aux_views),
                  reals_field("aux_noise", c.aux_noise), reals_field("aux_blur", c.aux_blur),
                  reals_field("aux_keep", c.aux_keep), int_field("paired_count", c.paired_count),
                  real_field("validation_fraction", c.validation_fraction)}});
    t.push_back({"schedule",
                 {int_field("T", c.schedule_T), real_field("beta_start", c.beta_start), real_field("beta_end", c.beta_end)}});
    std::vector<Field> prior, xm;
    training_fields(prior, c.prior, true);
    training_fields(xm, c.xmodal, false);
    t.push_back({"prior", std::move(prior)});
    t.push_back({"xmodal", std::move(xm)});
    auto& s = c.solver;
    t.push_back({"solver",
                 {int_field("T_prime", s.T_prime), real_field("adapt_lr", s.adapt_lr), int_field("minibatch_K", s.minibatch_K),
                  int_field("crossmodal_period", s.crossmodal_period), int_field("crossmodal_min_t", s.crossmodal_min_t),
                  int_field("inner_dc_steps", s.inner_dc_steps), real_field("dc_step_scale", s.dc_step_scale),
                  int_field("t_start", s.t_start)}});
    t.push_back({"sweep",
                 {ints_field("views", c.sweep_views), ints_field("steps", c.sweep_steps), reals_field("noise", c.sweep_noise),
                  {"modes", [&c](const std::string& v) { c.sweep_modes = parse_list<Mode>(v, parse_mode); },
                   [&c] { return fmt_list(c.sweep_modes, [](Mode m) { return std::string(mode_name(m)); }); }},
                  int_field("aux_views", c.aux_spec.num_views), real_field("aux_noise", c.aux_spec.noise_relative_sigma),
                  real_field("aux_blur", c.aux_spec.blur_sigma), real_field("aux_keep", c.aux_spec.sampling_keep_fraction),
                  int_field("dump_slice", c.dump_slice)}});
    return t;
}

// Line of each "[section] key" for diagnostics; ptree does not keep positions.
std::map<std::string, int> index_lines(const std::string& text) {
    std::map<std::string, int> lines;
    std::stringstream ss(text);
    std::string line, section;
    for (int n = 1; std::getline(ss, line); ++n) {
        line = trim(line);
        if (line.empty() || line[0] == ';' || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            lines.emplace("[" + section + "]", n);
        } else if (const auto eq = line.find('='); eq != std::string::npos) {
            lines.emplace("[" + section + "] " + trim(line.substr(0, eq)), n);
        }
    }
    return lines;
}

template <class F>
void checked(const char* key, F f) {
    try {
        f();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
    }
}

}  // namespace

const char* mode_name(Mode m) { return m == Mode::Crossmodal ? "crossmodal" : "unimodal"; }

void ExperimentConfig::validate() const {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    need(workers >= 1, "[experiment] workers must be >= 1");
    need(train_volumes >= 0, "[experiment] train_volumes must be >= 0");
    need(test_volumes >= 0, "[experiment] test_volumes must be >= 0");
    checked("[phantom]", [&] { recipe.validate(); });
    need(recipe.volume_side % 4 == 0, "[phantom] side must be a multiple of 4");
    need(prior_slices >= 0, "[phantom] prior_slices must be >= 0");
    need(pixel_pitch > 0.0, "[geometry] pixel_pitch must be > 0");
    need(ideal_views >= 2, "[degrade] ideal_views must be >= 2");
    for (int v : main_views) need(v >= 2, "[degrade] main_views entries must be >= 2");
    for (int v : aux_views) need(v >= 2, "[degrade] aux_views entries must be >= 2");
    for (double v : main_noise) need(v >= 0.0, "[degrade] main_noise entries must be >= 0");
    for (double v : aux_noise) need(v >= 0.0, "[degrade] aux_noise entries must be >= 0");
    for (double v : main_blur) need(v >= 0.0, "[degrade] main_blur entries must be >= 0");
    for (double v : aux_blur) need(v >= 0.0, "[degrade] aux_blur entries must be >= 0");
    for (double v : main_keep) need(v > 0.0 && v <= 1.0, "[degrade] main_keep entries must lie in (0, 1]");
    for (double v : aux_keep) need(v > 0.0 && v <= 1.0, "[degrade] aux_keep entries must lie in (0, 1]");
    need(paired_count >= 0, "[degrade] paired_count must be >= 0");
    need(validation_fraction >= 0.0 && validation_fraction < 1.0, "[degrade] validation_fraction must lie in [0, 1)");
    need(paired_count == 0 || train_volumes > 0, "[degrade] paired_count > 0 needs [experiment] train_volumes > 0");
    checked("[schedule]", [&] { (void)schedule(); });
    for (const auto* m : {&prior, &xmodal}) {
        const char* sec = m == &prior ? "[prior]" : "[xmodal]";
        need(m->epochs >= 0, std::string(sec) + " epochs must be >= 0");
        need(m->batch >= 1, std::string(sec) + " batch must be >= 1");
        need(m->base_channels >= 1 && m->base_channels <= 256, std::string(sec) + " base_channels must lie in [1, 256]");
        need(m->adversarial_weight >= 0.0, std::string(sec) + " adversarial_weight must be >= 0");
        need(m->discriminator_channels >= 1, std::string(sec) + " discriminator_channels must be >= 1");
        checked(sec, [&] { m->optimizer.validate(); });
    }
    checked("[prior]", [&] { prior_arch().validate(); });
    checked("[solver]", [&] { solver.validate(); });
    need(solver.adapt_lr >= 0.0, "[solver] adapt_lr must be >= 0");
    need(solver.minibatch_K <= recipe.depth, "[solver] minibatch_K must not exceed [phantom] depth");
    need(!sweep_views.empty() && !sweep_steps.empty() && !sweep_noise.empty() && !sweep_modes.empty(),
         "[sweep] views, steps, noise and modes must be non-empty");
    for (int v : sweep_views) need(v >= 2, "[sweep] views entries must be >= 2");
    for (int s : sweep_steps) need(s >= 0, "[sweep] steps entries must be >= 0");
    for (double n : sweep_noise) need(n >= 0.0, "[sweep] noise entries must be >= 0");
    checked("[sweep] aux", [&] { aux_spec.validate(); });
    need(dump_slice >= -1 && dump_slice < recipe.depth, "[sweep] dump_slice must be -1 or a valid slice index");
}

degrade::DegradationSpec ExperimentConfig::ideal_spec() const { return {ideal_views, 0.0, 0.0, 1.0, 0}; }

std::vector<std::pair<degrade::DegradationSpec, degrade::DegradationSpec>> ExperimentConfig::spec_grid() const {
    std::vector<degrade::DegradationSpec> mains, auxs;
    for (int v : main_views)
        for (double n : main_noise)
            for (double b : main_blur)
                for (double k : main_keep) mains.push_back({v, n, b, k, 0});
    for (int v : aux_views)
        for (double n : aux_noise)
            for (double b : aux_blur)
                for (double k : aux_keep) auxs.push_back({v, n, b, k, 0});
    std::vector<std::pair<degrade::DegradationSpec, degrade::DegradationSpec>> grid;
    for (const auto& m : mains)
        for (const auto& a : auxs) grid.emplace_back(m, a);
    return grid;
}

nn::UNetSpec ExperimentConfig::prior_arch() const {
    nn::UNetSpec a;
    a.in_channels = 1;
    a.base_channels = static_cast<std::uint32_t>(prior.base_channels);
    a.time_embed_dim = static_cast<std::uint32_t>(prior.time_embed_dim);
    a.image_side = static_cast<std::uint32_t>(recipe.volume_side);
    a.head = nn::OutputHead::Linear;
    return a;
}

diffusion::NoiseSchedule ExperimentConfig::schedule() const { return diffusion::make_schedule(schedule_T, beta_start, beta_end); }

ExperimentConfig parse_config(std::istream& is, const std::string& source) {
    const std::string text{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
    const auto lines = index_lines(text);
    auto where = [&](const std::string& id) {
        const auto it = lines.find(id);
        return source + (it != lines.end() ? ":" + std::to_string(it->second) : std::string()) + ": ";
    };

    pt::ptree tree;
    try {
        std::stringstream ss(text);
        pt::ini_parser::read_ini(ss, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
    }

    ExperimentConfig c;
    const Table table = bind(c);
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError(where("[] " + section) + "key '" + section + "' outside any section");
        const auto sec = std::find_if(table.begin(), table.end(), [&](const auto& s) { return s.first == section; });
        if (sec == table.end()) throw ConfigError(where("[" + section + "]") + "unknown section [" + section + "]");
        for (const auto& [key, value] : body) {
            const std::string id = "[" + section + "] " + key;
            const auto f = std::find_if(sec->second.begin(), sec->second.end(), [&](const Field& x) { return x.key == key; });
            if (f == sec->second.end()) throw ConfigError(where(id) + id + ": unknown key");
            try {
                f->parse(trim(value.data()));
            } catch (const BadValue& e) {
                throw ConfigError(where(id) + id + ": " + e.reason);
            }
        }
    }
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    return parse_config(in, path.string());
}

std::string to_ini(const ExperimentConfig& config) {
    ExperimentConfig copy = config;
    std::string out;
    for (const auto& [section, fields] : bind(copy)) {
        out += "[" + section + "]\n";
        for (const auto& f : fields) out += f.key + " = " + f.render() + "\n";
        out += "\n";
    }
    return out;
}

}  // namespace xmct::harness

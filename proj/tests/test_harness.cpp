#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "xmct/errors.hpp"
#include "xmct/harness/commands.hpp"
#include "xmct/harness/config.hpp"
#include "xmct/io.hpp"

using namespace xmct;
using namespace xmct::harness;
namespace fs = std::filesystem;

namespace {

const char* kSmoke = R"(
[experiment]
seed = 7
train_volumes = 2
test_volumes = 1

[phantom]
side = 16
depth = 4
prior_slices = 16

[degrade]
ideal_views = 32
main_views = 8
main_noise = 0
main_blur = 0
main_keep = 1
paired_count = 10
validation_fraction = 0.2

[prior]
base_channels = 2
time_embed_dim = 4
epochs = 2
batch = 4
optimizer = adam
lr = 0.002

[xmodal]
base_channels = 2
epochs = 1
batch = 4
optimizer = adam
lr = 0.002

[solver]
T_prime = 4
minibatch_K = 2
t_start = 100
inner_dc_steps = 3

[sweep]
views = 8
steps = 2
noise = 0
modes = unimodal, crossmodal
)";

ExperimentConfig smoke(const std::string& dir, const std::string& extra = "") {
    std::istringstream is(std::string(kSmoke) + extra);
    auto c = parse_config(is, "smoke");
    c.out_dir = fs::temp_directory_path() / "xmct_test_harness" / dir;
    fs::remove_all(c.out_dir);
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

// every regular file under root, keyed by relative path
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
    return out;
}

void run_all(const ExperimentConfig& c) {
    std::ostringstream log;
    generate_data(c, log);
    train_prior(c, false, log);
    train_xmodal(c, false, log);
    reconstruct(c, log);
    evaluate(c, log);
    report(c, log);
}

ExperimentConfig parse(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is, "t.ini");
}

std::string config_error(const std::string& text) {
    try {
        parse(text).validate();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("config parsing diagnostics") {
    CHECK(config_error("[nope]\nx = 1\n").find("nope") != std::string::npos);
    CHECK(config_error("[solver]\nbogus = 1\n").find("bogus") != std::string::npos);
    CHECK(config_error("[solver]\nT_prime = ten\n").find("T_prime") != std::string::npos);
    CHECK(config_error("[sweep]\nmodes = unimodal, sideways\n").find("modes") != std::string::npos);
    CHECK(config_error("[solver]\nminibatch_K = 99\n").find("minibatch_K") != std::string::npos);
    CHECK(config_error("[phantom]\nside = 30\n").find("side") != std::string::npos);
    CHECK(config_error("").empty());
}

TEST_CASE("canonical config round trip") {
    auto c = smoke("rt");
    c.solver.adapt_lr = 3.25e-6;
    c.sweep_noise = {0.0, 0.05};
    const std::string text = to_ini(c);
    const auto back = parse(text);
    CHECK(to_ini(back) == text);
    CHECK(back.solver.adapt_lr == 3.25e-6);
    CHECK(back.sweep_noise == c.sweep_noise);
    CHECK(back.recipe.volume_side == 16);
}

TEST_CASE("sweep cardinality") {
    auto c = smoke("card");
    c.test_volumes = 3;
    c.sweep_views = {8, 16, 32, 64};
    c.sweep_steps = {5, 10};
    c.sweep_noise = {0.0, 0.05};
    const auto cells = sweep_cells(c);
    CHECK(cells.size() == 96);
    int uni = 0;
    std::set<std::string> names;
    for (const auto& cell : cells) {
        uni += cell.mode == Mode::Unimodal;
        names.insert(cell.name());
    }
    CHECK(uni == 48);
    CHECK(names.size() == cells.size());
}

TEST_CASE("zero-count dataset") {
    auto c = smoke("empty");
    c.train_volumes = 0;
    c.test_volumes = 0;
    c.prior_slices = 0;
    c.paired_count = 0;
    std::ostringstream log;
    generate_data(c, log);
    const Layout l{c.out_dir};
    const std::string manifest = slurp(l.manifest());
    CHECK(manifest.find("volume ") == std::string::npos);
    CHECK(manifest.find("paired ") == std::string::npos);
}

TEST_CASE("missing inputs name the path") {
    auto c = smoke("missing");
    std::ostringstream log;
    for (auto step : {+[](const ExperimentConfig& cfg, std::ostream& l) { train_prior(cfg, false, l); },
                      +[](const ExperimentConfig& cfg, std::ostream& l) { train_xmodal(cfg, false, l); },
                      +[](const ExperimentConfig& cfg, std::ostream& l) { reconstruct(cfg, l); }}) {
        try {
            step(c, log);
            FAIL("expected a missing-input error");
        } catch (const std::exception& e) {
            CHECK(std::string(e.what()).find(c.out_dir.string()) != std::string::npos);
        }
    }
}

TEST_CASE("empty results give a header-only report") {
    auto c = smoke("noresults");
    std::ostringstream log;
    report(c, log);
    const Layout l{c.out_dir};
    const std::string csv = slurp(l.report() / "table.csv");
    CHECK(csv == "noise,steps,views,uni_psnr,uni_ssim,cross_psnr,cross_ssim,delta_psnr,delta_ssim,uni_status,cross_status\n");
    CHECK(fs::exists(l.report() / "table.md"));
}

TEST_CASE("smoke pipeline end to end") {
    const auto c = smoke("pipeline");
    run_all(c);
    const Layout l{c.out_dir};
    const auto cells = sweep_cells(c);
    REQUIRE(cells.size() == 2);

    // both modes see the same measurements
    const auto dir_u = l.results() / cells[0].name();
    const auto dir_x = l.results() / cells[1].name();
    REQUIRE(cells[0].mode != cells[1].mode);
    CHECK(slurp(dir_u / "y_main.xmgr") == slurp(dir_x / "y_main.xmgr"));

    // cadence pattern in the cross-modal trace
    std::ifstream ts(cells[1].mode == Mode::Crossmodal ? dir_x / "trace.txt" : dir_u / "trace.txt");
    const auto trace = io::read_trace(ts);
    REQUIRE(trace.size() == 4);
    for (const auto& r : trace) {
        CHECK(r.refined == (r.t % 2 == 0 && r.t > 1));
        CHECK(r.adapt_losses.size() == 2);
    }

    // the delta column is cross minus uni at output precision
    std::istringstream csv(slurp(l.report() / "table.csv"));
    std::string line;
    std::getline(csv, line);
    REQUIRE(std::getline(csv, line));
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
    REQUIRE(f.size() == 11);
    CHECK(f[9] == "ok");
    CHECK(f[10] == "ok");
    CHECK(std::stod(f[7]) == doctest::Approx(std::stod(f[5]) - std::stod(f[3])).epsilon(1.5e-4));
    CHECK(std::stod(f[8]) == doctest::Approx(std::stod(f[6]) - std::stod(f[4])).epsilon(1.5e-4));
    bool image = false;
    for (const auto& e : fs::directory_iterator(l.report() / "images")) image |= e.path().extension() == ".pgm";
    CHECK(image);

    SUBCASE("rerun is byte-identical") {
        const auto first = snapshot(c.out_dir);
        run_all(smoke("pipeline"));
        const auto second = snapshot(c.out_dir);
        CHECK(first.size() == second.size());
        for (const auto& [k, v] : first) {
            INFO(k);
            CHECK(second.count(k) == 1);
            if (second.count(k)) CHECK(second.at(k) == v);
        }
    }
}

TEST_CASE("prior training resumes exactly") {
    auto whole = smoke("resume_whole");
    auto split = smoke("resume_split");
    std::ostringstream log;
    generate_data(whole, log);
    generate_data(split, log);
    train_prior(whole, false, log);

    auto half = split;
    half.prior.epochs = 1;
    train_prior(half, false, log);
    train_prior(split, true, log);

    const Layout lw{whole.out_dir}, ls{split.out_dir};
    CHECK(slurp(lw.models() / "prior_loss.csv") == slurp(ls.models() / "prior_loss.csv"));
    CHECK(io::read_denoiser(lw.prior_ckpt()).params.theta == io::read_denoiser(ls.prior_ckpt()).params.theta);
}

TEST_CASE("a failing cell does not stop the sweep") {
    auto c = smoke("isolation");
    c.test_volumes = 2;
    c.sweep_modes = {Mode::Unimodal};
    std::ostringstream log;
    generate_data(c, log);
    train_prior(c, false, log);
    train_xmodal(c, false, log);

    const Layout l{c.out_dir};
    const auto cells = sweep_cells(c);
    REQUIRE(cells.size() == 2);
    // a truncated test volume fails the cells that need it
    std::ofstream(l.volume("test", 1, "main"), std::ios::binary | std::ios::trunc) << "XMGR";
    const auto summary = reconstruct(c, log);
    CHECK(summary.cells == 2);
    CHECK(summary.failed == 1);
    for (const auto& cell : cells) {
        const auto dir = l.results() / cell.name();
        CHECK(fs::exists(dir / "recon.xmgr") == (cell.volume == 0));
        CHECK(fs::exists(dir / "FAILED") == (cell.volume == 1));
    }
    evaluate(c, log);
    report(c, log);
    const std::string csv = slurp(l.report() / "table.csv");
    CHECK(csv.find("failed 1/2") != std::string::npos);
    // nothing is averaged over the surviving volume alone
    CHECK(csv.find("0,2,8,,,,,,,failed 1/2,missing") != std::string::npos);
}

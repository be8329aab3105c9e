#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "xmct/errors.hpp"
#include "xmct/io.hpp"

using namespace xmct;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "xmct_test_io";
    fs::create_directories(dir);
    return dir / name;
}

GridVolume sample_volume() {
    GridVolume v(3, 5);
    for (int s = 0; s < 3; ++s) v[static_cast<std::size_t>(s)] = testing::random_image(5, 5, 10 + static_cast<std::uint64_t>(s));
    return v;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST_CASE("grid round trip") {
    const auto v = sample_volume();
    const auto p = scratch("v.grid");
    io::write_grid(p, v);
    const auto back = io::read_grid(p);
    REQUIRE(back.depth() == 3);
    for (int s = 0; s < 3; ++s) CHECK(back[static_cast<std::size_t>(s)].values == v[static_cast<std::size_t>(s)].values);
    // header 4 + 2 + 3*4 + 2, payload 75 doubles
    CHECK(fs::file_size(p) == 20 + 75 * 8);

    io::write_grid(p, v, io::DType::F32);
    CHECK(fs::file_size(p) == 20 + 75 * 4);
    const auto f32 = io::read_grid(p);
    CHECK(testing::max_abs_diff(f32[1].values, v[1].values) < 1e-7);

    // a second write is byte-identical
    io::write_grid(p, v);
    const auto first = slurp(p);
    io::write_grid(p, v);
    CHECK(slurp(p) == first);
}

TEST_CASE("grid read errors") {
    const auto v = sample_volume();
    std::stringstream ss;
    io::write_grid(ss, v);
    const std::string bytes = ss.str();

    std::string bad = bytes;
    bad[0] = 'Q';
    std::istringstream b1(bad);
    CHECK_THROWS_AS(io::read_grid(b1), IoError);

    std::istringstream b2(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(io::read_grid(b2), IoError);

    std::istringstream b3(bytes + "x");
    CHECK_THROWS_AS(io::read_grid(b3), IoError);

    std::string version = bytes;
    version[4] = 9;
    std::istringstream b4(version);
    CHECK_THROWS_AS(io::read_grid(b4), IoError);

    CHECK_THROWS_AS(io::read_grid(scratch("missing.grid")), IoError);
}

TEST_CASE("sinogram round trip") {
    const auto g = tomo::make_parallel_geometry(16, 12);
    const auto s = tomo::forward_project(testing::disk(16, 0.5, 0.7), g);
    const auto p = scratch("s.grid");
    io::write_sinogram(p, s);
    CHECK(io::read_sinogram(p, g).values == s.values);
    CHECK_THROWS_AS(io::read_sinogram(p, tomo::make_parallel_geometry(16, 13)), DimensionError);
}

TEST_CASE("denoiser checkpoint round trip") {
    io::DenoiserCheckpoint c;
    c.params = diffusion::init_denoiser(nn::UNetSpec{1, 2, 4, 8, nn::OutputHead::Linear}, 3);
    c.schedule = diffusion::make_schedule(50, 2e-4, 0.03);
    c.trained_steps = 17;
    c.optimizer_state.assign(2 * c.params.theta.size(), 0.25f);
    const auto p = scratch("d.ckpt");
    io::write_denoiser(p, c);
    const auto back = io::read_denoiser(p);
    CHECK(back.params.theta == c.params.theta);
    CHECK(back.params.arch.base_channels == 2);
    CHECK(back.params.arch.image_side == 8);
    CHECK(back.schedule.T == 50);
    CHECK(back.schedule.alpha_bar == c.schedule.alpha_bar);
    CHECK(back.trained_steps == 17);
    CHECK(back.optimizer_state == c.optimizer_state);

    // the translator reader rejects a diffusion checkpoint
    CHECK_THROWS_AS(io::read_translator(p), IoError);

    const std::string bytes = slurp(p);
    {
        std::ofstream os(p, std::ios::binary);
        os << bytes.substr(0, bytes.size() - 10);
    }
    CHECK_THROWS_AS(io::read_denoiser(p), IoError);
}

TEST_CASE("translator checkpoint round trip") {
    io::TranslatorCheckpoint c;
    c.model = xmodal::init_translation(8, 2, 5);
    c.model.trained_with.epochs = 3;
    c.model.trained_with.optimizer.lr = 1.5e-3;
    c.model.trained_with.seed = 99;
    c.model.trained_steps = 12;
    const auto p = scratch("t.ckpt");
    io::write_translator(p, c);
    const auto back = io::read_translator(p);
    CHECK(back.model.theta == c.model.theta);
    CHECK(back.model.trained_with.epochs == 3);
    CHECK(back.model.trained_with.optimizer.lr == 1.5e-3);
    CHECK(back.model.trained_with.seed == 99);
    CHECK(back.model.trained_steps == 12);
    CHECK(back.optimizer_state.empty());
    CHECK_THROWS_AS(io::read_denoiser(p), IoError);
}

TEST_CASE("trace round trip") {
    std::vector<solver::StepRecord> trace(2);
    trace[0].t = 2;
    trace[0].tau = 200;
    trace[0].adapt_losses = {1.25, 0.5};
    trace[0].refined = true;
    trace[0].residual = 3.5;
    trace[0].psnr = 21.125;
    trace[1].t = 1;
    trace[1].tau = 100;
    std::stringstream ss;
    io::write_trace(ss, trace);
    const auto back = io::read_trace(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[0].t == 2);
    CHECK(back[0].tau == 200);
    CHECK(back[0].adapt_losses == trace[0].adapt_losses);
    CHECK(back[0].refined);
    CHECK(back[0].residual == 3.5);
    CHECK(back[0].psnr == 21.125);
    CHECK(back[1].adapt_losses.empty());
    CHECK_FALSE(back[1].refined);

    std::istringstream bad("t=1 bogus=3\n");
    CHECK_THROWS_AS(io::read_trace(bad), IoError);
}

TEST_CASE("pgm and atomic text") {
    GridImage img(4, 2);
    img.values = {0.0, 0.5, 1.0, 2.0, -1.0, 0.25, 0.75, 1.0};
    const auto p = scratch("i.pgm");
    io::write_pgm(p, img);
    const std::string bytes = slurp(p);
    const std::string header = "P5\n4 2\n255\n";
    REQUIRE(bytes.size() == header.size() + 8);
    CHECK(bytes.substr(0, header.size()) == header);
    const auto px = [&](int i) { return static_cast<unsigned char>(bytes[header.size() + static_cast<std::size_t>(i)]); };
    CHECK(px(0) == 0);
    CHECK(px(2) == 255);
    CHECK(px(3) == 255);
    CHECK(px(4) == 0);

    const auto t = scratch("a.txt");
    io::write_text_atomic(t, "hello\n");
    CHECK(slurp(t) == "hello\n");
    io::write_text_atomic(t, "again\n");
    CHECK(slurp(t) == "again\n");
    CHECK_FALSE(fs::exists(t.string() + ".tmp"));
}

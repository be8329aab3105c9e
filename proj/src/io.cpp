#include "xmct/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace xmct::io {

namespace {

constexpr std::uint16_t kVersion = 1;

template <typename U>
void put_le(std::ostream& os, U v) {
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get_le(std::istream& is) {
    unsigned char buf[sizeof(U)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) throw IoError("unexpected end of file");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(buf[i]) << (8 * i));
    return v;
}

void put_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::istream& is) { return std::bit_cast<double>(get_le<std::uint64_t>(is)); }

void put_f32_block(std::ostream& os, const std::vector<float>& v) {
    std::vector<unsigned char> buf(v.size() * 4);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto u = std::bit_cast<std::uint32_t>(v[i]);
        for (int b = 0; b < 4; ++b) buf[i * 4 + static_cast<std::size_t>(b)] = static_cast<unsigned char>((u >> (8 * b)) & 0xff);
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

std::vector<float> get_f32_block(std::istream& is, std::size_t n) {
    std::vector<unsigned char> buf(n * 4);
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
        throw IoError("truncated parameter payload");
    std::vector<float> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t u = 0;
        for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(buf[i * 4 + static_cast<std::size_t>(b)]) << (8 * b);
        v[i] = std::bit_cast<float>(u);
    }
    return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    return is;
}

void put_arch(std::ostream& os, const nn::UNetSpec& a) {
    put_le(os, a.in_channels);
    put_le(os, a.base_channels);
    put_le(os, a.time_embed_dim);
    put_le(os, a.image_side);
    put_le(os, static_cast<std::uint32_t>(a.head));
}

nn::UNetSpec get_arch(std::istream& is) {
    nn::UNetSpec a;
    a.in_channels = get_le<std::uint32_t>(is);
    a.base_channels = get_le<std::uint32_t>(is);
    a.time_embed_dim = get_le<std::uint32_t>(is);
    a.image_side = get_le<std::uint32_t>(is);
    a.head = static_cast<nn::OutputHead>(get_le<std::uint32_t>(is));
    a.validate();
    return a;
}

void expect_magic(std::istream& is, const char (&magic)[4], const std::filesystem::path& path) {
    char m[4];
    if (!is.read(m, 4) || std::memcmp(m, magic, 4) != 0) throw IoError("bad magic in " + path.string());
    const auto version = get_le<std::uint16_t>(is);
    if (version != kVersion) throw IoError("unsupported version " + std::to_string(version) + " in " + path.string());
}

void put_payload(std::ostream& os, std::int64_t steps, const std::vector<float>& theta, const std::vector<float>& state) {
    put_le(os, static_cast<std::uint64_t>(steps));
    put_le(os, static_cast<std::uint64_t>(theta.size()));
    put_le(os, static_cast<std::uint64_t>(state.size()));
    put_f32_block(os, theta);
    put_f32_block(os, state);
}

void get_payload(std::istream& is, std::int64_t& steps, std::vector<float>& theta, std::vector<float>& state) {
    steps = static_cast<std::int64_t>(get_le<std::uint64_t>(is));
    const auto n = get_le<std::uint64_t>(is);
    const auto m = get_le<std::uint64_t>(is);
    if (n > (std::uint64_t{1} << 32) || m > 2 * n) throw IoError("implausible parameter count");
    theta = get_f32_block(is, n);
    state = get_f32_block(is, m);
}

}  // namespace

void write_grid(std::ostream& os, const GridVolume& vol, DType dtype) {
    os.write("XMGR", 4);
    put_le(os, kVersion);
    put_le(os, static_cast<std::uint32_t>(vol.width()));
    put_le(os, static_cast<std::uint32_t>(vol.height()));
    put_le(os, static_cast<std::uint32_t>(vol.depth()));
    put_le(os, static_cast<std::uint16_t>(dtype));
    for (const auto& s : vol.slices) {
        if (dtype == DType::F32) {
            std::vector<float> f(s.values.begin(), s.values.end());
            put_f32_block(os, f);
        } else {
            std::string buf(s.values.size() * 8, '\0');
            for (std::size_t i = 0; i < s.values.size(); ++i) {
                const auto u = std::bit_cast<std::uint64_t>(s.values[i]);
                for (int b = 0; b < 8; ++b) buf[i * 8 + static_cast<std::size_t>(b)] = static_cast<char>((u >> (8 * b)) & 0xff);
            }
            os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        }
    }
    if (!os) throw IoError("write failure");
}

void write_grid(const std::filesystem::path& path, const GridVolume& vol, DType dtype) {
    auto os = open_out(path);
    write_grid(os, vol, dtype);
}

GridVolume read_grid(std::istream& is) {
    char m[4];
    if (!is.read(m, 4) || std::memcmp(m, "XMGR", 4) != 0) throw IoError("not a grid file (bad magic)");
    const auto version = get_le<std::uint16_t>(is);
    if (version != kVersion) throw IoError("unsupported grid version " + std::to_string(version));
    const auto w = get_le<std::uint32_t>(is);
    const auto h = get_le<std::uint32_t>(is);
    const auto d = get_le<std::uint32_t>(is);
    const auto dtype = static_cast<DType>(get_le<std::uint16_t>(is));
    if (dtype != DType::F32 && dtype != DType::F64) throw IoError("unknown grid dtype");
    if (w == 0 || h == 0 || d == 0 || static_cast<std::uint64_t>(w) * h * d > (std::uint64_t{1} << 31))
        throw IoError("implausible grid dimensions");
    std::vector<GridImage> slices;
    slices.reserve(d);
    for (std::uint32_t k = 0; k < d; ++k) {
        GridImage img(static_cast<int>(w), static_cast<int>(h));
        if (dtype == DType::F32) {
            const auto f = get_f32_block(is, img.size());
            std::copy(f.begin(), f.end(), img.values.begin());
        } else {
            for (auto& v : img.values) v = get_f64(is);
        }
        slices.push_back(std::move(img));
    }
    if (is.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes after grid payload");
    return GridVolume(std::move(slices));
}

GridVolume read_grid(const std::filesystem::path& path) {
    auto is = open_in(path);
    try {
        return read_grid(is);
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_sinogram(const std::filesystem::path& path, const tomo::Sinogram& sino) {
    GridImage img(sino.geometry.num_detector_bins, sino.geometry.num_angles());
    img.values = sino.values;
    write_grid(path, GridVolume({img}), DType::F64);
}

tomo::Sinogram read_sinogram(const std::filesystem::path& path, const tomo::ProjectionGeometry& geometry) {
    const auto g = read_grid(path);
    if (g.depth() != 1 || g.width() != geometry.num_detector_bins || g.height() != geometry.num_angles())
        throw DimensionError(path.string() + ": sinogram shape does not match geometry");
    tomo::Sinogram s(geometry);
    s.values = g[0].values;
    return s;
}

void write_denoiser(const std::filesystem::path& path, const DenoiserCheckpoint& ckpt) {
    ckpt.params.validate();
    auto os = open_out(path);
    os.write(kDiffusionMagic, 4);
    put_le(os, kVersion);
    put_arch(os, ckpt.params.arch);
    put_le(os, static_cast<std::uint32_t>(ckpt.schedule.T));
    put_f64(os, ckpt.schedule.beta_start);
    put_f64(os, ckpt.schedule.beta_end);
    put_payload(os, ckpt.trained_steps, ckpt.params.theta, ckpt.optimizer_state);
    if (!os) throw IoError("write failure: " + path.string());
}

DenoiserCheckpoint read_denoiser(const std::filesystem::path& path) {
    auto is = open_in(path);
    expect_magic(is, kDiffusionMagic, path);
    DenoiserCheckpoint c;
    c.params.arch = get_arch(is);
    const auto T = get_le<std::uint32_t>(is);
    const double b0 = get_f64(is), b1 = get_f64(is);
    c.schedule = diffusion::make_schedule(static_cast<int>(T), b0, b1);
    get_payload(is, c.trained_steps, c.params.theta, c.optimizer_state);
    c.params.validate();
    return c;
}

void write_translator(const std::filesystem::path& path, const TranslatorCheckpoint& ckpt) {
    ckpt.model.validate();
    auto os = open_out(path);
    os.write(kTranslatorMagic, 4);
    put_le(os, kVersion);
    put_arch(os, ckpt.model.arch);
    const auto& tw = ckpt.model.trained_with;
    put_le(os, std::uint32_t{0});  // channel order: (estimate, aux)
    put_f64(os, tw.adversarial_weight);
    put_le(os, static_cast<std::uint32_t>(tw.epochs));
    put_le(os, static_cast<std::uint32_t>(tw.batch));
    put_le(os, static_cast<std::uint32_t>(tw.optimizer.kind));
    put_f64(os, tw.optimizer.lr);
    put_f64(os, tw.optimizer.momentum);
    put_f64(os, tw.optimizer.beta2);
    put_f64(os, tw.optimizer.max_grad_norm);
    put_le(os, static_cast<std::uint64_t>(tw.seed));
    put_payload(os, ckpt.model.trained_steps, ckpt.model.theta, ckpt.optimizer_state);
    if (!os) throw IoError("write failure: " + path.string());
}

TranslatorCheckpoint read_translator(const std::filesystem::path& path) {
    auto is = open_in(path);
    expect_magic(is, kTranslatorMagic, path);
    TranslatorCheckpoint c;
    c.model.arch = get_arch(is);
    if (get_le<std::uint32_t>(is) != 0) throw IoError(path.string() + ": unsupported channel order");
    auto& tw = c.model.trained_with;
    tw.adversarial_weight = get_f64(is);
    tw.epochs = static_cast<int>(get_le<std::uint32_t>(is));
    tw.batch = static_cast<int>(get_le<std::uint32_t>(is));
    const auto kind = get_le<std::uint32_t>(is);
    if (kind > 1) throw IoError(path.string() + ": unknown optimizer kind");
    tw.optimizer.kind = static_cast<diffusion::OptimizerKind>(kind);
    tw.optimizer.lr = get_f64(is);
    tw.optimizer.momentum = get_f64(is);
    tw.optimizer.beta2 = get_f64(is);
    tw.optimizer.max_grad_norm = get_f64(is);
    tw.seed = get_le<std::uint64_t>(is);
    get_payload(is, c.model.trained_steps, c.model.theta, c.optimizer_state);
    c.model.validate();
    return c;
}

void write_pgm(const std::filesystem::path& path, const GridImage& img, double lo, double hi) {
    auto os = open_out(path);
    os << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::string buf(img.size(), '\0');
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double v = std::clamp((img.values[i] - lo) / (hi - lo), 0.0, 1.0);
        buf[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void write_trace(std::ostream& os, const std::vector<solver::StepRecord>& trace) {
    char buf[256];
    for (const auto& r : trace) {
        std::snprintf(buf, sizeof buf, "t=%d tau=%d refined=%d residual=%.9g psnr=%.6f losses=", r.t, r.tau,
                      r.refined ? 1 : 0, r.residual, r.psnr);
        os << buf;
        for (std::size_t i = 0; i < r.adapt_losses.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%s%.9g", i ? ";" : "", r.adapt_losses[i]);
            os << buf;
        }
        os << "\n";
    }
}

std::vector<solver::StepRecord> read_trace(std::istream& is) {
    std::vector<solver::StepRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        solver::StepRecord r;
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) throw IoError("trace: malformed token '" + tok + "'");
            const auto key = tok.substr(0, eq), val = tok.substr(eq + 1);
            if (key == "t") r.t = std::stoi(val);
            else if (key == "tau") r.tau = std::stoi(val);
            else if (key == "refined") r.refined = val == "1";
            else if (key == "residual") r.residual = std::stod(val);
            else if (key == "psnr") r.psnr = std::stod(val);
            else if (key == "losses") {
                std::istringstream vs(val);
                std::string part;
                while (std::getline(vs, part, ';'))
                    if (!part.empty()) r.adapt_losses.push_back(std::stod(part));
            } else {
                throw IoError("trace: unknown key '" + key + "'");
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open for writing: " + tmp.string());
        os << content;
        if (!os) throw IoError("write failure: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace xmct::io

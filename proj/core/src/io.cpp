#include "velofilt/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "velofilt/error.hpp"

namespace velofilt::io {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace {

fs::path with_ext(const fs::path& stem, const char* ext) {
    fs::path p = stem;
    p += ext;
    return p;
}

std::string read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <class T>
T get_field(const json& j, const char* key, const fs::path& src) {
    if (!j.contains(key))
        fail(ErrorKind::Io, src.string() + ": header missing '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        fail(ErrorKind::Io, src.string() + ": bad type for '" + key + "'");
    }
}

}  // namespace

void write_text_atomic(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Io, "cannot write " + tmp.string());
        out.write(text.data(), std::streamsize(text.size()));
        if (!out) fail(ErrorKind::Io, "write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) fail(ErrorKind::Io, "rename to " + path.string() + " failed: " + ec.message());
}

void write_frame_stack(const FrameStack& frames, const fs::path& stem) {
    const Grid2D& g = frames.grid();
    json h = {{"version", 1},
              {"nx", g.nx},
              {"nz", g.nz},
              {"nt", frames.nt()},
              {"dx_mm", g.dx},
              {"dz_mm", g.dz},
              {"dt_s", frames.dt()},
              {"x0_mm", g.x0},
              {"z0_mm", g.z0},
              {"layout", "t-major,z-row-major,x-fastest"},
              {"dtype", "f32"},
              {"endian", "little"}};

    std::string raw(frames.size() * sizeof(float), '\0');
    for (std::size_t i = 0; i < frames.size(); ++i) {
        float f = float(frames.data()[i]);
        std::memcpy(raw.data() + i * sizeof(float), &f, sizeof(float));
    }
    write_text_atomic(with_ext(stem, ".f32"), raw);
    write_text_atomic(with_ext(stem, ".json"), h.dump(2) + "\n");
}

FrameStack read_frame_stack(const fs::path& stem) {
    const fs::path hp = with_ext(stem, ".json");
    json h;
    try {
        h = json::parse(read_all(hp));
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Io, hp.string() + ": " + e.what());
    }
    if (get_field<int>(h, "version", hp) != 1) fail(ErrorKind::Io, hp.string() + ": unsupported version");
    if (get_field<std::string>(h, "dtype", hp) != "f32" ||
        get_field<std::string>(h, "endian", hp) != "little" ||
        get_field<std::string>(h, "layout", hp) != "t-major,z-row-major,x-fastest")
        fail(ErrorKind::Io, hp.string() + ": unsupported dtype/endian/layout");

    Grid2D g;
    g.nx = get_field<int>(h, "nx", hp);
    g.nz = get_field<int>(h, "nz", hp);
    g.dx = get_field<double>(h, "dx_mm", hp);
    g.dz = get_field<double>(h, "dz_mm", hp);
    g.x0 = get_field<double>(h, "x0_mm", hp);
    g.z0 = get_field<double>(h, "z0_mm", hp);
    const int nt = get_field<int>(h, "nt", hp);
    const double dt = get_field<double>(h, "dt_s", hp);
    if (g.nx < 1 || g.nz < 1 || nt < 1 || !(g.dx > 0) || !(g.dz > 0) || !(dt > 0))
        fail(ErrorKind::Io, hp.string() + ": invalid dimensions");

    const fs::path dp = with_ext(stem, ".f32");
    const std::string raw = read_all(dp);
    const std::size_t n = g.size() * std::size_t(nt);
    if (raw.size() != n * sizeof(float))
        fail(ErrorKind::Io, dp.string() + ": expected " + std::to_string(n) + " floats");
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        float f;
        std::memcpy(&f, raw.data() + i * sizeof(float), sizeof(float));
        if (!std::isfinite(f)) fail(ErrorKind::Io, dp.string() + ": non-finite sample");
        data[i] = f;
    }
    return FrameStack(g, nt, dt, std::move(data));
}

void write_image(const Image& img, const fs::path& stem) {
    write_frame_stack(FrameStack(img.grid, 1, 1.0, img.data), stem);
}

Image read_image(const fs::path& stem) {
    FrameStack fs_ = read_frame_stack(stem);
    return fs_.frame_image(0);
}

void write_pgm(const Image& img, const fs::path& path) {
    const double mx = img.data.empty() ? 0.0 : *std::max_element(img.data.begin(), img.data.end());
    std::string out = "P5\n" + std::to_string(img.grid.nx) + " " + std::to_string(img.grid.nz) +
                      "\n255\n";
    const std::size_t head = out.size();
    out.resize(head + img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        double v = mx > 0 ? img.data[i] / mx * 255.0 : 0.0;
        out[head + i] = char(std::uint8_t(std::clamp(std::lround(v), 0L, 255L)));
    }
    write_text_atomic(path, out);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t file_checksum(const fs::path& path) { return fnv1a64(read_all(path)); }

std::string hex64(std::uint64_t v) {
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << v;
    return ss.str();
}

}  // namespace velofilt::io

#include "artifacts.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "velofilt/error.hpp"
#include "velofilt/io.hpp"

namespace cli {

namespace vf = velofilt;
using nlohmann::json;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& p, const std::string& header) {
    std::ifstream in(p);
    if (!in) throw InputError("cannot open " + p.string());
    std::string line;
    if (!std::getline(in, line) || line != header)
        vf::fail(vf::ErrorKind::Io, p.string() + ": unexpected header");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

double to_num(const std::string& s, const fs::path& p) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        vf::fail(vf::ErrorKind::Io, p.string() + ": bad number '" + s + "'");
    }
}

constexpr const char* kTruthHeader = "t_index,id,x_mm,z_mm,vx_mm_s,vz_mm_s";
constexpr const char* kLocHeader = "t_index,x_mm,z_mm,score,vf_x_mm_s,vf_z_mm_s";

}  // namespace

void write_truth_points(const std::vector<vf::phantom::PointRecord>& pts, const fs::path& p) {
    std::string s = std::string(kTruthHeader) + "\n";
    for (const auto& r : pts)
        s += std::to_string(r.t) + "," + std::to_string(r.id) + "," + fmt(r.x) + "," + fmt(r.z) +
             "," + fmt(r.vx) + "," + fmt(r.vz) + "\n";
    vf::io::write_text_atomic(p, s);
}

std::vector<vf::phantom::PointRecord> read_truth_points(const fs::path& p) {
    std::vector<vf::phantom::PointRecord> out;
    for (const auto& c : read_csv(p, kTruthHeader)) {
        if (c.size() != 6) vf::fail(vf::ErrorKind::Io, p.string() + ": expected 6 columns");
        vf::phantom::PointRecord r;
        r.t = int(to_num(c[0], p));
        r.id = std::int64_t(to_num(c[1], p));
        r.x = to_num(c[2], p);
        r.z = to_num(c[3], p);
        r.vx = to_num(c[4], p);
        r.vz = to_num(c[5], p);
        out.push_back(r);
    }
    return out;
}

void write_localizations(const vf::localize::LocalizationSet& locs, const fs::path& p) {
    std::string s = std::string(kLocHeader) + "\n";
    for (const auto& l : locs)
        s += std::to_string(l.t_index) + "," + fmt(l.x) + "," + fmt(l.z) + "," + fmt(l.score) +
             "," + fmt(l.vf_x) + "," + fmt(l.vf_z) + "\n";
    vf::io::write_text_atomic(p, s);
}

vf::localize::LocalizationSet read_localizations(const fs::path& p) {
    vf::localize::LocalizationSet out;
    for (const auto& c : read_csv(p, kLocHeader)) {
        if (c.size() != 6) vf::fail(vf::ErrorKind::Io, p.string() + ": expected 6 columns");
        vf::localize::Localization l;
        l.t_index = int(to_num(c[0], p));
        l.x = to_num(c[1], p);
        l.z = to_num(c[2], p);
        l.score = to_num(c[3], p);
        l.vf_x = to_num(c[4], p);
        l.vf_z = to_num(c[5], p);
        l.tagged = l.vf_x != 0.0 || l.vf_z != 0.0;
        out.push_back(l);
    }
    return out;
}

void write_mask(const vf::Mask& m, const fs::path& stem) {
    vf::FrameStack s(m.grid, 1, 1.0);
    for (std::size_t i = 0; i < m.data.size(); ++i) s.data()[i] = m.data[i] ? 1.0 : 0.0;
    vf::io::write_frame_stack(s, stem);
}

vf::Mask read_mask(const fs::path& stem) {
    const vf::FrameStack s = vf::io::read_frame_stack(stem);
    vf::Mask m(s.grid());
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = s.data()[i] > 0.5;
    return m;
}

void write_velocity(const vf::VelocityMap& v, const fs::path& stem) {
    vf::FrameStack s(v.grid, 2, 1.0);
    const std::size_t n = v.grid.size();
    for (std::size_t i = 0; i < n; ++i) {
        s.data()[i] = v.vx[i];
        s.data()[n + i] = v.vz[i];
    }
    vf::io::write_frame_stack(s, stem);
}

vf::VelocityMap read_velocity(const fs::path& stem) {
    const vf::FrameStack s = vf::io::read_frame_stack(stem);
    if (s.nt() != 2) vf::fail(vf::ErrorKind::Io, stem.string() + ": expected 2 frames (vx, vz)");
    vf::VelocityMap v(s.grid());
    const std::size_t n = s.grid().size();
    for (std::size_t i = 0; i < n; ++i) {
        v.vx[i] = s.data()[i];
        v.vz[i] = s.data()[n + i];
    }
    return v;
}

void require_input(const fs::path& p, const std::string& stage) {
    if (!fs::exists(p)) throw InputError(stage + ": missing input " + p.string());
}

Manifest::Manifest(fs::path out_dir, const json& config, std::uint64_t seed)
    : dir_(std::move(out_dir)) {
    const fs::path mp = dir_ / "manifest.json";
    if (fs::exists(mp)) {
        try {
            std::ifstream in(mp);
            doc_ = json::parse(in);
        } catch (const std::exception&) {
            doc_ = json::object();
        }
    }
    if (!doc_.is_object()) doc_ = json::object();
    doc_["tool_version"] = VELOFILT_VERSION;
    doc_["seed"] = seed;
    doc_["config_hash"] = vf::io::hex64(vf::io::fnv1a64(config.dump()));
    if (!doc_.contains("artifacts")) doc_["artifacts"] = json::object();
    if (!doc_.contains("stages_s")) doc_["stages_s"] = json::object();
}

void Manifest::add(const std::string& name, const fs::path& file) {
    doc_["artifacts"][name] = {{"path", fs::relative(file, dir_).generic_string()},
                               {"fnv1a64", vf::io::hex64(vf::io::file_checksum(file))}};
}

void Manifest::add_stack(const std::string& name, const fs::path& stem) {
    add(name + ".header", fs::path(stem.string() + ".json"));
    add(name, fs::path(stem.string() + ".f32"));
}

void Manifest::stage_time(const std::string& stage, double seconds) {
    doc_["stages_s"][stage] = seconds;
}

void Manifest::write() const {
    vf::io::write_text_atomic(dir_ / "manifest.json", doc_.dump(2) + "\n");
}

}  // namespace cli

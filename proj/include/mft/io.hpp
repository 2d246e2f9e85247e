#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mft/capacity.hpp"
#include "mft/synthesis.hpp"

// Serialization: capacity-model descriptions from JSON, CSV emission with
// header rows, the binary coefficient-field container with its JSON
// manifest, and content hashing for reproducibility manifests.

namespace mft {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Capacity models from JSON. Kinds:
//   {"kind":"lebesgue","dim":D}
//   {"kind":"cascade","dim":D,"weights":[...2^D...]}
//   {"kind":"gibbs","dim":D,"potential":[...],"depth":m}
//       potential: uniform table on [0,1), applied per coordinate and summed
//   {"kind":"product","left":{...},"right":{...}}
//   {"kind":"power","base":{...},"s":s}
//   {"kind":"shift","base":{...},"s":s}      (signed; +s attenuates)
//   {"kind":"auxiliary","base":{...},"r":r}

inline ModelPtr parseModel(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "lebesgue") {
        return CascadeModel::lebesgue(j.at("dim").get<int>());
    }
    if (kind == "cascade") {
        return std::make_shared<CascadeModel>(j.at("dim").get<int>(),
                                              j.at("weights").get<std::vector<double>>());
    }
    if (kind == "gibbs") {
        const auto table = j.at("potential").get<std::vector<double>>();
        if (table.empty()) throw std::invalid_argument("gibbs: empty potential table");
        const int depth = j.value("depth", 24);
        GibbsModel::Potential phi = [table](std::span<const double> x) {
            double s = 0.0;
            for (const double xi : x) {
                // piecewise-linear periodic interpolation of the table
                const double t = (xi - std::floor(xi)) * double(table.size());
                const std::size_t i0 = static_cast<std::size_t>(t) % table.size();
                const std::size_t i1 = (i0 + 1) % table.size();
                const double fr = t - std::floor(t);
                s += (1.0 - fr) * table[i0] + fr * table[i1];
            }
            return s;
        };
        return std::make_shared<GibbsModel>(j.at("dim").get<int>(), std::move(phi), depth);
    }
    if (kind == "product") {
        return std::make_shared<ProductModel>(parseModel(j.at("left")),
                                              parseModel(j.at("right")));
    }
    if (kind == "power") {
        return std::make_shared<PowerModel>(parseModel(j.at("base")),
                                            j.at("s").get<double>());
    }
    if (kind == "shift") {
        return shiftedModel(parseModel(j.at("base")), j.at("s").get<double>());
    }
    if (kind == "auxiliary") {
        return auxiliaryModel(parseModel(j.at("base")), j.at("r").get<double>());
    }
    throw std::invalid_argument("parseModel: unknown kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// CSV with a header row; fixed %.12g formatting so identical inputs yield
// byte-identical files.

inline std::string csvNumber(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline void writeCsv(const std::filesystem::path& path,
                     const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("writeCsv: cannot open " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i)
        os << (i ? "," : "") << header[i];
    os << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            os << (i ? "," : "") << csvNumber(row[i]);
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Binary coefficient-field container: header (magic, D, J, orientation
// count), then per-level little-endian f64 arrays in lexicographic (k, l)
// order for levels 1..J. A JSON manifest is written alongside.

inline constexpr char kFieldMagic[8] = {'M', 'F', 'C', 'F', '0', '1', '\n', '\0'};

inline void writeField(const std::filesystem::path& path, const DenseField& f,
                       const json& extra_manifest = json::object()) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("writeField: cannot open " + path.string());
    os.write(kFieldMagic, 8);
    const std::uint32_t d = static_cast<std::uint32_t>(f.dim());
    const std::uint32_t J = static_cast<std::uint32_t>(f.maxLevel());
    const std::uint32_t nl = static_cast<std::uint32_t>(f.orientations());
    os.write(reinterpret_cast<const char*>(&d), 4);
    os.write(reinterpret_cast<const char*>(&J), 4);
    os.write(reinterpret_cast<const char*>(&nl), 4);
    for (int j = 1; j <= f.maxLevel(); ++j) {
        const auto lvl = f.levelData(j);
        os.write(reinterpret_cast<const char*>(lvl.data()),
                 static_cast<std::streamsize>(lvl.size() * sizeof(double)));
    }
    os.close();

    json man = extra_manifest;
    man["format"] = "coefficient-field";
    man["dim"] = f.dim();
    man["max_level"] = f.maxLevel();
    man["orientations"] = f.orientations();
    man["scaling_coefficient"] = f.scalingCoefficient();
    std::ofstream ms(path.string() + ".json");
    ms << man.dump(2) << '\n';
}

inline std::shared_ptr<DenseField> readField(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("readField: cannot open " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != std::string(kFieldMagic, 8))
        throw std::runtime_error("readField: bad magic");
    std::uint32_t d = 0, J = 0, nl = 0;
    is.read(reinterpret_cast<char*>(&d), 4);
    is.read(reinterpret_cast<char*>(&J), 4);
    is.read(reinterpret_cast<char*>(&nl), 4);
    auto f = std::make_shared<DenseField>(static_cast<int>(d), static_cast<int>(J));
    if (f->orientations() != nl) throw std::runtime_error("readField: orientation mismatch");
    for (int j = 1; j <= static_cast<int>(J); ++j) {
        auto lvl = f->levelData(j);
        is.read(reinterpret_cast<char*>(lvl.data()),
                static_cast<std::streamsize>(lvl.size() * sizeof(double)));
        if (!is) throw std::runtime_error("readField: truncated file");
    }
    return f;
}

// ---------------------------------------------------------------------------
// FNV-1a content hash for output manifests.

inline std::string contentHash(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("contentHash: cannot open " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!is) break;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

// Manifest of every file in a result directory, with content hashes and a
// claim tag naming what the run tests.
inline json buildManifest(const std::filesystem::path& dir,
                          const std::vector<std::string>& claims) {
    json man;
    man["claims"] = claims;
    json files = json::object();
    std::vector<std::filesystem::path> paths;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "manifest.json")
            paths.push_back(e.path());
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) files[p.filename().string()] = contentHash(p);
    man["files"] = files;
    return man;
}

}  // namespace mft

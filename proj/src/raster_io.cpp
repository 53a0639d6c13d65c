#include "terra/raster_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "terra/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "raster payloads are little-endian; big-endian hosts need byte swaps");

namespace terra {

namespace {

constexpr uint32_t kMagicF32 = 0x52463332;  // "RF32"
constexpr uint32_t kMagicU8 = 0x52553820;   // "RU8 "

void write_header(std::ofstream& f, uint32_t magic, int rows, int cols) {
    const uint32_t h[4] = {magic, static_cast<uint32_t>(rows), static_cast<uint32_t>(cols), 0};
    f.write(reinterpret_cast<const char*>(h), sizeof(h));
}

void read_header(std::ifstream& f, uint32_t magic, int& rows, int& cols, const std::string& path) {
    uint32_t h[4] = {0, 0, 0, 0};
    f.read(reinterpret_cast<char*>(h), sizeof(h));
    if (!f || h[0] != magic) throw DataError("bad raster header in " + path);
    rows = static_cast<int>(h[1]);
    cols = static_cast<int>(h[2]);
    if (rows <= 0 || cols <= 0 || static_cast<int64_t>(rows) * cols > (1LL << 32))
        throw DataError("implausible raster shape in " + path);
}

}  // namespace

void write_f32(const std::string& path, const FloatGrid& g) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    write_header(f, kMagicF32, g.rows, g.cols);
    f.write(reinterpret_cast<const char*>(g.v.data()),
            static_cast<std::streamsize>(g.v.size() * sizeof(float)));
    if (!f) throw IoError("short write to " + path);
}

FloatGrid read_f32(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingArtifactError(path);
    int rows = 0, cols = 0;
    read_header(f, kMagicF32, rows, cols, path);
    FloatGrid g(rows, cols);
    f.read(reinterpret_cast<char*>(g.v.data()),
           static_cast<std::streamsize>(g.v.size() * sizeof(float)));
    if (!f) throw DataError("truncated raster " + path);
    return g;
}

void write_u8(const std::string& path, const MaskGrid& g) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    write_header(f, kMagicU8, g.rows, g.cols);
    f.write(reinterpret_cast<const char*>(g.v.data()), static_cast<std::streamsize>(g.v.size()));
    if (!f) throw IoError("short write to " + path);
}

MaskGrid read_u8(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingArtifactError(path);
    int rows = 0, cols = 0;
    read_header(f, kMagicU8, rows, cols, path);
    MaskGrid g(rows, cols);
    f.read(reinterpret_cast<char*>(g.v.data()), static_cast<std::streamsize>(g.v.size()));
    if (!f) throw DataError("truncated raster " + path);
    return g;
}

void write_kv(const std::string& path, const KvMap& kv) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    for (const auto& [k, v] : kv) f << k << ' ' << v << '\n';
}

KvMap read_kv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingArtifactError(path);
    KvMap kv;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        const size_t sp = line.find(' ');
        if (sp == std::string::npos) continue;
        kv[line.substr(0, sp)] = line.substr(sp + 1);
    }
    return kv;
}

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

}  // namespace terra

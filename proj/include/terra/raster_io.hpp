#pragma once

#include <map>
#include <string>

#include "terra/grid.hpp"

namespace terra {

// Raster payloads on disk: little-endian 32-bit float (".f32") or 8-bit
// (".u8"), row-major, with a 16-byte header (magic, rows, cols). Round-trips
// are bit-exact.
void write_f32(const std::string& path, const FloatGrid& g);
FloatGrid read_f32(const std::string& path);
void write_u8(const std::string& path, const MaskGrid& g);
MaskGrid read_u8(const std::string& path);

// UTF-8 "key value" text files (one pair per line, '#' comments).
using KvMap = std::map<std::string, std::string>;
void write_kv(const std::string& path, const KvMap& kv);
KvMap read_kv(const std::string& path);

bool file_exists(const std::string& path);
void ensure_dir(const std::string& path);

}  // namespace terra

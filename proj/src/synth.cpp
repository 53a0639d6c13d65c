#include "terra/synth.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "terra/raster_io.hpp"
#include "terra/rng.hpp"

namespace terra {

void SynthConfig::validate() const {
    if (size_px < 32) throw ConfigError("size_px must be >= 32, got " + std::to_string(size_px));
    if (resolution_m <= 0) throw ConfigError("resolution_m must be > 0");
    if (terrain_amplitude_m < 0) throw ConfigError("terrain_amplitude_m must be >= 0");
    if (building_density_km2 < 0) throw ConfigError("building_density_km2 must be >= 0");
    if (vegetation_density_km2 < 0) throw ConfigError("vegetation_density_km2 must be >= 0");
    if (building_height_min_m <= 0 || building_height_max_m < building_height_min_m)
        throw ConfigError("building height range invalid");
    if (building_side_min_m <= 0 || building_side_max_m < building_side_min_m)
        throw ConfigError("building side range invalid");
    if (veg_height_min_m <= 0 || veg_height_max_m < veg_height_min_m)
        throw ConfigError("vegetation height range invalid");
}

TerrainField generate_terrain(const SynthConfig& config) {
    config.validate();
    const int n = config.size_px;
    const int nc = n / 2 + 1;
    Rng rng(Rng::substream(config.seed, "terrain"));

    // Hermitian half-spectrum with amplitude ~ |k|^-roughness, DC removed.
    std::vector<fftw_complex> spec(static_cast<size_t>(n) * nc);
    for (int ky = 0; ky < n; ++ky) {
        const int fy = ky <= n / 2 ? ky : ky - n;
        for (int kx = 0; kx < nc; ++kx) {
            const double k = std::sqrt(static_cast<double>(fy) * fy + static_cast<double>(kx) * kx);
            double amp = k > 0 ? std::pow(k, -config.terrain_roughness) : 0.0;
            const double re = rng.normal() * amp;
            const double im = rng.normal() * amp;
            spec[static_cast<size_t>(ky) * nc + kx][0] = re;
            spec[static_cast<size_t>(ky) * nc + kx][1] = im;
        }
    }
    // The kx = 0 and (even n) kx = n/2 columns alias onto themselves; enforce
    // the conjugate symmetry the c2r transform assumes.
    std::vector<int> self_cols = {0};
    if (n % 2 == 0) self_cols.push_back(n / 2);
    for (const int kx : self_cols) {
        spec[static_cast<size_t>(0) * nc + kx][1] = 0.0;
        if (n % 2 == 0) spec[static_cast<size_t>(n / 2) * nc + kx][1] = 0.0;
        for (int ky = 1; ky < (n + 1) / 2; ++ky) {
            auto& a = spec[static_cast<size_t>(ky) * nc + kx];
            auto& b = spec[static_cast<size_t>(n - ky) * nc + kx];
            b[0] = a[0];
            b[1] = -a[1];
        }
    }

    std::vector<double> field(static_cast<size_t>(n) * n);
    fftw_plan plan = fftw_plan_dft_c2r_2d(n, n, spec.data(), field.data(), FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);

    double lo = field[0], hi = field[0];
    for (const double h : field) {
        lo = std::min(lo, h);
        hi = std::max(hi, h);
    }
    TerrainField t;
    t.resolution_m = config.resolution_m;
    t.seed = config.seed;
    t.heights = FloatGrid(n, n);
    const double range = hi - lo;
    if (range > 0 && config.terrain_amplitude_m > 0) {
        for (size_t i = 0; i < field.size(); ++i)
            t.heights.v[i] =
                static_cast<float>((field[i] - lo) / range * config.terrain_amplitude_m);
    }  // else: flat zero terrain
    return t;
}

namespace {

struct RotRect {
    double cy, cx;      // center, px
    double half_u;      // half length along the major (ridge) axis, px
    double half_v;      // half width across it, px
    double cos_t, sin_t;

    // Local coordinates of pixel center (r, c) in the rect frame.
    bool contains(int r, int c, double* v_out = nullptr) const {
        const double dy = r - cy, dx = c - cx;
        const double u = dx * cos_t + dy * sin_t;
        const double v = -dx * sin_t + dy * cos_t;
        if (std::abs(u) > half_u || std::abs(v) > half_v) return false;
        if (v_out) *v_out = v;
        return true;
    }
};

}  // namespace

StructureLayer place_structures(const TerrainField& terrain, const SynthConfig& config) {
    config.validate();
    if (!all_finite(terrain.heights)) throw ContractError("terrain heights must be finite");
    const int n_rows = terrain.heights.rows, n_cols = terrain.heights.cols;
    const double res = terrain.resolution_m;
    const double area_km2 = n_rows * res * n_cols * res / 1e6;

    StructureLayer layer;
    layer.add_heights = FloatGrid(n_rows, n_cols, 0.0f);
    layer.footprint = MaskGrid(n_rows, n_cols, 0);
    layer.kind_map = Grid<uint8_t>(n_rows, n_cols, static_cast<uint8_t>(PixelKind::ground));

    const FloatGrid slope = slope_magnitude(terrain.heights, res);

    // Buildings: slope-biased rejection sampling of non-overlapping rectangles.
    Rng rng(Rng::substream(terrain.seed ^ config.seed, "structures"));
    const long n_buildings = std::lround(config.building_density_km2 * area_km2);
    constexpr int kRetryBudget = 400;
    constexpr double kSlopeScale = 0.12;  // acceptance halves every ~8% grade
    for (long b = 0; b < n_buildings; ++b) {
        bool placed = false;
        for (int attempt = 0; attempt < kRetryBudget && !placed; ++attempt) {
            const double cy = rng.uniform(0.0, n_rows - 1.0);
            const double cx = rng.uniform(0.0, n_cols - 1.0);
            const double s = slope.at(static_cast<int>(cy), static_cast<int>(cx));
            if (rng.uniform() > std::exp(-s / kSlopeScale)) continue;

            RotRect rect;
            rect.cy = cy;
            rect.cx = cx;
            rect.half_u = 0.5 * rng.uniform(config.building_side_min_m, config.building_side_max_m) / res;
            rect.half_v = 0.5 * rng.uniform(config.building_side_min_m, config.building_side_max_m) / res;
            if (rect.half_u < rect.half_v) std::swap(rect.half_u, rect.half_v);
            const double theta = rng.uniform(0.0, 3.14159265358979323846);
            rect.cos_t = std::cos(theta);
            rect.sin_t = std::sin(theta);
            const double height = rng.uniform(config.building_height_min_m, config.building_height_max_m);
            const double gable =
                rng.coin(config.gable_probability) ? rng.uniform(0.0, config.gable_max_ratio) : 0.0;

            const double reach = std::hypot(rect.half_u, rect.half_v) + 1.0;
            const int r0 = static_cast<int>(std::floor(cy - reach));
            const int r1 = static_cast<int>(std::ceil(cy + reach));
            const int c0 = static_cast<int>(std::floor(cx - reach));
            const int c1 = static_cast<int>(std::ceil(cx + reach));
            if (r0 < 0 || c0 < 0 || r1 >= n_rows || c1 >= n_cols) continue;

            std::vector<std::pair<int, int>> cells;
            std::vector<float> ridge_v;
            bool blocked = false;
            float base = -1e30f;
            for (int r = r0; r <= r1 && !blocked; ++r) {
                for (int c = c0; c <= c1; ++c) {
                    double v = 0.0;
                    if (!rect.contains(r, c, &v)) continue;
                    if (layer.footprint.at(r, c)) {
                        blocked = true;
                        break;
                    }
                    cells.emplace_back(r, c);
                    ridge_v.push_back(static_cast<float>(std::abs(v)));
                    base = std::max(base, terrain.heights.at(r, c));
                }
            }
            if (blocked || cells.empty()) continue;

            // Level roof on the uphill-most ground; gable raises the ridge line.
            for (size_t i = 0; i < cells.size(); ++i) {
                const auto [r, c] = cells[i];
                const double ridge = 1.0 - ridge_v[i] / (rect.half_v > 0 ? rect.half_v : 1.0);
                const double roof = base + height * (1.0 + gable * std::max(0.0, ridge));
                layer.add_heights.at(r, c) = static_cast<float>(roof) - terrain.heights.at(r, c);
                layer.footprint.at(r, c) = 1;
                layer.kind_map.at(r, c) = static_cast<uint8_t>(PixelKind::building);
            }
            placed = true;
        }
        if (!placed)
            throw GenerationError(
                "could not place building " + std::to_string(b + 1) + " of " +
                std::to_string(n_buildings) +
                " within the retry budget; building_density_km2 is too high for this terrain");
    }

    // Vegetation: clusters of Gaussian bumps, anywhere off-footprint.
    const long n_clusters = std::lround(config.vegetation_density_km2 * area_km2);
    FloatGrid veg(n_rows, n_cols, 0.0f);
    for (long k = 0; k < n_clusters; ++k) {
        const double cy = rng.uniform(0.0, n_rows - 1.0);
        const double cx = rng.uniform(0.0, n_cols - 1.0);
        const int n_bumps = 2 + rng.below_int(6);
        for (int t = 0; t < n_bumps; ++t) {
            const double by = cy + rng.normal() * 6.0;
            const double bx = cx + rng.normal() * 6.0;
            const double h = rng.uniform(config.veg_height_min_m, config.veg_height_max_m);
            const double sigma = rng.uniform(1.0, 4.5) / res;  // canopy radius, px
            const int rad = static_cast<int>(std::ceil(3.0 * sigma));
            for (int r = std::max(0, static_cast<int>(by) - rad);
                 r <= std::min(n_rows - 1, static_cast<int>(by) + rad); ++r) {
                for (int c = std::max(0, static_cast<int>(bx) - rad);
                     c <= std::min(n_cols - 1, static_cast<int>(bx) + rad); ++c) {
                    const double d2 = (r - by) * (r - by) + (c - bx) * (c - bx);
                    if (d2 > rad * static_cast<double>(rad)) continue;
                    veg.at(r, c) += static_cast<float>(h * std::exp(-d2 / (2.0 * sigma * sigma)));
                }
            }
        }
    }
    constexpr float kVegCutoff = 0.05f;  // meters; below this a canopy tail is ground
    for (int r = 0; r < n_rows; ++r) {
        for (int c = 0; c < n_cols; ++c) {
            if (layer.footprint.at(r, c) || veg.at(r, c) < kVegCutoff) continue;
            layer.add_heights.at(r, c) = veg.at(r, c);
            layer.kind_map.at(r, c) = static_cast<uint8_t>(PixelKind::vegetation);
        }
    }
    return layer;
}

SceneBundle compose_scene(const TerrainField& terrain, const StructureLayer& layer,
                          const std::string& scene_id) {
    if (!terrain.heights.same_shape(layer.add_heights) ||
        !terrain.heights.same_shape(layer.footprint))
        throw ContractError("compose_scene: terrain and structure layer shapes differ");
    SceneBundle s;
    s.scene_id = scene_id;
    s.dtm = terrain;
    s.dsm = terrain;
    s.ndsm = terrain;
    for (size_t i = 0; i < terrain.heights.v.size(); ++i) {
        const float dsm = terrain.heights.v[i] + layer.add_heights.v[i];
        s.dsm.heights.v[i] = dsm;
        s.ndsm.heights.v[i] = dsm - terrain.heights.v[i];
    }
    s.footprint = layer.footprint;
    validate_scene(s);
    return s;
}

SceneBundle generate_scene(const SynthConfig& config, const std::string& scene_id) {
    const TerrainField terrain = generate_terrain(config);
    const StructureLayer layer = place_structures(terrain, config);
    return compose_scene(terrain, layer, scene_id);
}

void validate_scene(const SceneBundle& s) {
    const auto& dtm = s.dtm.heights;
    const auto& dsm = s.dsm.heights;
    const auto& ndsm = s.ndsm.heights;
    if (!dtm.same_shape(dsm) || !dtm.same_shape(ndsm) || !dtm.same_shape(s.footprint))
        throw ContractError("scene grids must share shape");
    for (size_t i = 0; i < dtm.v.size(); ++i) {
        if (!(dsm.v[i] >= dtm.v[i])) throw ContractError("dsm < dtm at pixel " + std::to_string(i));
        if (ndsm.v[i] != dsm.v[i] - dtm.v[i])
            throw ContractError("ndsm != dsm - dtm at pixel " + std::to_string(i));
        if (s.footprint.v[i] && !(ndsm.v[i] > 0))
            throw ContractError("footprint pixel with zero ndsm at " + std::to_string(i));
    }
}

void save_scene(const SceneBundle& scene, const std::string& dir, const std::string& config_hash) {
    ensure_dir(dir);
    KvMap kv;
    kv["scene_id"] = scene.scene_id;
    kv["rows"] = std::to_string(scene.dtm.heights.rows);
    kv["cols"] = std::to_string(scene.dtm.heights.cols);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", scene.dtm.resolution_m);
    kv["resolution_m"] = buf;
    kv["seed"] = std::to_string(scene.dtm.seed);
    kv["config_hash"] = config_hash;
    write_kv(dir + "/scene.txt", kv);
    write_f32(dir + "/dtm.f32", scene.dtm.heights);
    write_f32(dir + "/dsm.f32", scene.dsm.heights);
    write_f32(dir + "/ndsm.f32", scene.ndsm.heights);
    write_u8(dir + "/footprint.u8", scene.footprint);
}

SceneBundle load_scene(const std::string& dir) {
    const KvMap kv = read_kv(dir + "/scene.txt");
    SceneBundle s;
    s.scene_id = kv.count("scene_id") ? kv.at("scene_id") : dir;
    const double res = kv.count("resolution_m") ? std::stod(kv.at("resolution_m")) : 1.0;
    const uint64_t seed = kv.count("seed") ? std::stoull(kv.at("seed")) : 0;
    s.dtm = {read_f32(dir + "/dtm.f32"), res, seed};
    s.dsm = {read_f32(dir + "/dsm.f32"), res, seed};
    s.ndsm = {read_f32(dir + "/ndsm.f32"), res, seed};
    s.footprint = read_u8(dir + "/footprint.u8");
    return s;
}

}  // namespace terra

#pragma once

#include <cstdint>
#include <string>

#include "terra/grid.hpp"

namespace terra {

// Bare-earth heightfield.
struct TerrainField {
    FloatGrid heights;
    double resolution_m = 1.0;
    uint64_t seed = 0;
};

enum class PixelKind : uint8_t { ground = 0, building = 1, vegetation = 2 };

// Above-ground structures, relative to the terrain.
struct StructureLayer {
    FloatGrid add_heights;   // meters above the terrain, >= 0
    MaskGrid footprint;      // 1 where a building stands
    Grid<uint8_t> kind_map;  // PixelKind per pixel
};

// Aligned DTM/DSM/nDSM/footprint quadruple for one scene.
struct SceneBundle {
    TerrainField dtm;
    TerrainField dsm;
    TerrainField ndsm;
    MaskGrid footprint;
    std::string scene_id;
};

struct SynthConfig {
    int size_px = 512;
    double resolution_m = 1.0;
    double terrain_amplitude_m = 40.0;
    double terrain_roughness = 2.0;  // spectral exponent of the power-law falloff
    double building_density_km2 = 80.0;
    double building_height_min_m = 3.0;
    double building_height_max_m = 15.0;
    double building_side_min_m = 6.0;
    double building_side_max_m = 40.0;
    double gable_probability = 0.5;
    double gable_max_ratio = 0.3;  // ridge raises the roof by up to this fraction
    double vegetation_density_km2 = 120.0;  // tree clusters per km^2
    double veg_height_min_m = 2.0;
    double veg_height_max_m = 25.0;
    uint64_t seed = 0;

    void validate() const;
};

// Band-limited spectral noise with power-law falloff, peak-to-peak scaled to
// terrain_amplitude_m and shifted so min height is 0. Deterministic in seed.
TerrainField generate_terrain(const SynthConfig& config);

// Buildings are extruded rectangles (flat or gabled, level roofs) placed with
// acceptance probability decreasing in local slope; vegetation is clusters of
// smooth bumps. Throws GenerationError naming the dense parameter when
// rejection sampling exhausts its retry budget.
StructureLayer place_structures(const TerrainField& terrain, const SynthConfig& config);

// dsm = dtm + add_heights, ndsm = dsm - dtm (both evaluated in storage
// precision so the algebra is exact as stored).
SceneBundle compose_scene(const TerrainField& terrain, const StructureLayer& layer,
                          const std::string& scene_id = "scene");

SceneBundle generate_scene(const SynthConfig& config, const std::string& scene_id);

// Throws ContractError if any SceneBundle invariant is violated.
void validate_scene(const SceneBundle& scene);

// One directory per scene: key/value manifest + .f32/.u8 rasters. Bit-exact.
void save_scene(const SceneBundle& scene, const std::string& dir,
                const std::string& config_hash);
SceneBundle load_scene(const std::string& dir);

}  // namespace terra

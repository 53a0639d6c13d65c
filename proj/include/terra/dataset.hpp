#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "terra/grid.hpp"
#include "terra/synth.hpp"

namespace terra {

enum class Task : uint8_t { pretext = 0, segmentation = 1 };
enum class Split : uint8_t { train = 0, val = 1, test = 2 };
enum class NormMode : uint8_t { per_tile_minshift = 0, global_affine = 1 };

std::string to_string(Task t);
std::string to_string(Split s);
Task task_from_string(const std::string& s);
Split split_from_string(const std::string& s);

// One tile: a window into a scene plus its normalization frame. Pixel data is
// materialized on demand from the scene directory.
struct TileRecord {
    std::string tile_id;
    std::string scene_id;
    std::string scene_dir;
    int row = 0;  // offset in scene pixels
    int col = 0;
    int size_px = 0;
    Split split = Split::train;
    bool labeled = true;
    float norm_offset = 0.0f;
    float norm_scale = 1.0f;
};

struct DatasetManifest {
    Task task = Task::pretext;
    uint64_t seed = 0;
    int tile_px = 128;
    int stride_px = 128;
    bool noisy_targets = false;  // targets read footprint_noisy.u8
    NormMode norm_mode = NormMode::per_tile_minshift;
    std::vector<TileRecord> tiles;

    std::vector<const TileRecord*> tiles_in(Split split, bool labeled_only = false) const;
    std::vector<std::string> scene_ids() const;  // distinct, in first-appearance order

    void save(const std::string& path) const;
    static DatasetManifest load(const std::string& path);
};

// Label-noise emulation of shifted test distributions.
struct NoiseSpec {
    double p_remove_building = 0.0;
    double p_add_phantom_building = 0.0;
    int max_shift_px = 0;
    double p_boundary_erode_dilate = 0.0;
    uint64_t seed = 0;

    void validate() const;
    bool is_noop() const;
};

// Tiles a scene on a regular stride, dropping partial border tiles.
// For pretext tiles the (input, target) pair is (DSM, DTM); for segmentation
// it is (nDSM, footprint). Normalization stats are left at identity.
std::vector<TileRecord> tile_scene(const SceneBundle& scene, const std::string& scene_dir,
                                   int tile_px, int stride_px, Task task);

// Normalization stats for a tile input window. per-tile-minshift uses
// offset = min, scale = max(range, 1 m); global_affine uses the supplied frame.
void normalize_tile(TileRecord& tile, const FloatGrid& input_window, NormMode mode,
                    float global_offset = 0.0f, float global_scale = 100.0f);

// Scene-level split assignment (all tiles of a scene share a split).
DatasetManifest make_splits(const std::vector<TileRecord>& records, Task task, int tile_px,
                            int stride_px, double f_train, double f_val, double f_test,
                            uint64_t seed);

// Marks ceil(fraction * |train|) train tiles as labeled via a seeded
// permutation prefix, so smaller budgets nest inside larger ones.
DatasetManifest subsample_labels(const DatasetManifest& manifest, double fraction, uint64_t seed);

// Writes footprint_noisy.u8 next to each scene's clean mask and flips the
// manifest to noisy targets. Inputs and clean masks are untouched.
DatasetManifest inject_label_noise(const DatasetManifest& manifest, const NoiseSpec& spec);

// Generic single-band raster ingestion.
struct ElevationRaster {
    FloatGrid heights;
    double resolution_m = 1.0;
    MaskGrid fill_mask;  // 1 where a void pixel was filled
};

struct RasterPayload {
    FloatGrid grid;
    double resolution_m = 0.0;
    int bands = 1;
    std::optional<float> nodata;
};
using RasterSource = std::function<RasterPayload()>;

enum class RasterKind : uint8_t { dtm = 0, dsm = 1, ndsm = 2, mask = 3 };

// Validates the payload and fills NaN/nodata pixels by nearest neighbor.
ElevationRaster ingest_raster(const RasterSource& source, RasterKind kind);

// Number of pixels where dsm - dtm < -eps (callers warn when nonzero).
size_t ndsm_violations(const ElevationRaster& dsm, const ElevationRaster& dtm,
                       double eps_m = 0.01);

// Materialized tile pixel data in the tile's normalization frame.
struct TileData {
    FloatGrid input;       // normalized input raster
    FloatGrid target_f;    // pretext: normalized DTM (same frame as input)
    MaskGrid target_mask;  // segmentation: footprint window (noisy when manifest says so)
    MaskGrid clean_mask;   // segmentation: always the clean footprint window
};

// Loads scene rasters at most once each.
class SceneCache {
  public:
    const SceneBundle& get(const std::string& scene_dir);
    const MaskGrid& get_noisy_mask(const std::string& scene_dir);
    void clear();

  private:
    std::map<std::string, SceneBundle> scenes_;
    std::map<std::string, MaskGrid> noisy_;
};

struct TileView {
    int input_upscale = 1;  // 2 emulates a 2x ground-resolution shift
};

TileData load_tile(const DatasetManifest& manifest, const TileRecord& tile, SceneCache& cache,
                   const TileView& view = {});

}  // namespace terra

#include "terra/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include "terra/morph.hpp"
#include "terra/raster_io.hpp"
#include "terra/rng.hpp"

namespace terra {

std::string to_string(Task t) { return t == Task::pretext ? "pretext" : "segmentation"; }
std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

Task task_from_string(const std::string& s) {
    if (s == "pretext") return Task::pretext;
    if (s == "segmentation") return Task::segmentation;
    throw ConfigError("unknown task '" + s + "'");
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ConfigError("unknown split '" + s + "'");
}

void NoiseSpec::validate() const {
    auto prob = [](double p, const char* name) {
        if (p < 0.0 || p > 1.0) throw ConfigError(std::string(name) + " must be in [0,1]");
    };
    prob(p_remove_building, "p_remove_building");
    prob(p_add_phantom_building, "p_add_phantom_building");
    prob(p_boundary_erode_dilate, "p_boundary_erode_dilate");
    if (max_shift_px < 0) throw ConfigError("max_shift_px must be >= 0");
}

bool NoiseSpec::is_noop() const {
    return p_remove_building == 0.0 && p_add_phantom_building == 0.0 && max_shift_px == 0 &&
           p_boundary_erode_dilate == 0.0;
}

std::vector<const TileRecord*> DatasetManifest::tiles_in(Split split, bool labeled_only) const {
    std::vector<const TileRecord*> out;
    for (const auto& t : tiles)
        if (t.split == split && (!labeled_only || t.labeled)) out.push_back(&t);
    return out;
}

std::vector<std::string> DatasetManifest::scene_ids() const {
    std::vector<std::string> ids;
    for (const auto& t : tiles)
        if (std::find(ids.begin(), ids.end(), t.scene_id) == ids.end()) ids.push_back(t.scene_id);
    return ids;
}

std::vector<TileRecord> tile_scene(const SceneBundle& scene, const std::string& scene_dir,
                                   int tile_px, int stride_px, Task task) {
    const int rows = scene.dtm.heights.rows, cols = scene.dtm.heights.cols;
    if (tile_px > rows || tile_px > cols)
        throw ConfigError("tile_px " + std::to_string(tile_px) + " exceeds scene size " +
                          std::to_string(rows) + "x" + std::to_string(cols));
    if (stride_px < 1) throw ConfigError("stride_px must be >= 1");
    (void)task;  // input/target selection happens at load time
    std::vector<TileRecord> out;
    for (int r = 0; r + tile_px <= rows; r += stride_px) {
        for (int c = 0; c + tile_px <= cols; c += stride_px) {
            TileRecord t;
            t.scene_id = scene.scene_id;
            t.scene_dir = scene_dir;
            t.row = r;
            t.col = c;
            t.size_px = tile_px;
            t.tile_id = scene.scene_id + "_r" + std::to_string(r) + "_c" + std::to_string(c);
            out.push_back(std::move(t));
        }
    }
    return out;
}

void normalize_tile(TileRecord& tile, const FloatGrid& input_window, NormMode mode,
                    float global_offset, float global_scale) {
    if (!all_finite(input_window)) throw DataError("non-finite values in tile " + tile.tile_id);
    if (mode == NormMode::global_affine) {
        if (!(global_scale > 0)) throw ConfigError("global_affine scale must be > 0");
        tile.norm_offset = global_offset;
        tile.norm_scale = global_scale;
        return;
    }
    float lo = input_window.v[0], hi = input_window.v[0];
    for (const float x : input_window.v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    tile.norm_offset = lo;
    tile.norm_scale = std::max(hi - lo, 1.0f);  // 1 m range clamp
}

DatasetManifest make_splits(const std::vector<TileRecord>& records, Task task, int tile_px,
                            int stride_px, double f_train, double f_val, double f_test,
                            uint64_t seed) {
    if (f_train < 0 || f_val < 0 || f_test < 0 ||
        std::abs(f_train + f_val + f_test - 1.0) > 1e-9)
        throw ConfigError("split fractions must be non-negative and sum to 1");

    std::vector<std::string> scenes;
    for (const auto& t : records)
        if (std::find(scenes.begin(), scenes.end(), t.scene_id) == scenes.end())
            scenes.push_back(t.scene_id);
    int wanted_splits = (f_train > 0) + (f_val > 0) + (f_test > 0);
    if (static_cast<int>(scenes.size()) < wanted_splits)
        throw ConfigError("fewer scenes (" + std::to_string(scenes.size()) +
                          ") than requested splits (" + std::to_string(wanted_splits) + ")");

    std::sort(scenes.begin(), scenes.end());
    Rng rng(Rng::substream(seed, "splits"));
    rng.shuffle(scenes);

    const auto s = static_cast<long>(scenes.size());
    long n_train = std::lround(f_train * s);
    long n_val = std::lround(f_val * s);
    if (f_train > 0) n_train = std::max(n_train, 1L);
    if (f_val > 0) n_val = std::max(n_val, 1L);
    if (f_test > 0) n_train = std::min(n_train, s - n_val - 1);
    n_train = std::max(n_train, f_train > 0 ? 1L : 0L);
    if (n_train + n_val > s) n_val = s - n_train;

    std::map<std::string, Split> assign;
    for (long i = 0; i < s; ++i)
        assign[scenes[i]] =
            i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);

    DatasetManifest m;
    m.task = task;
    m.seed = seed;
    m.tile_px = tile_px;
    m.stride_px = stride_px;
    m.tiles = records;
    for (auto& t : m.tiles) {
        t.split = assign.at(t.scene_id);
        t.labeled = t.split == Split::train;
    }
    return m;
}

DatasetManifest subsample_labels(const DatasetManifest& manifest, double fraction, uint64_t seed) {
    if (manifest.task != Task::segmentation)
        throw ContractError("subsample_labels applies to segmentation manifests");
    if (!(fraction > 0.0) || fraction > 1.0) throw ConfigError("label fraction must be in (0,1]");

    DatasetManifest out = manifest;
    std::vector<size_t> train_idx;
    for (size_t i = 0; i < out.tiles.size(); ++i)
        if (out.tiles[i].split == Split::train) train_idx.push_back(i);
    const auto n_labeled =
        static_cast<size_t>(std::ceil(fraction * static_cast<double>(train_idx.size())));
    if (n_labeled == 0) throw ConfigError("label fraction yields zero labeled tiles");

    // A single seeded permutation; budgets are prefixes of it, so 1% ⊂ 10% ⊂ 100%.
    Rng rng(Rng::substream(seed, "label-budget"));
    rng.shuffle(train_idx);
    for (const size_t i : train_idx) out.tiles[i].labeled = false;
    for (size_t k = 0; k < n_labeled && k < train_idx.size(); ++k)
        out.tiles[train_idx[k]].labeled = true;
    return out;
}

namespace {

MaskGrid rasterize_phantom(const MaskGrid& base, Rng& rng) {
    MaskGrid out = base;
    const int rows = base.rows, cols = base.cols;
    const double half_u = 0.5 * rng.uniform(6.0, 40.0);
    const double half_v = 0.5 * rng.uniform(6.0, 40.0);
    const double theta = rng.uniform(0.0, 3.14159265358979323846);
    const double ct = std::cos(theta), st = std::sin(theta);
    const double cy = rng.uniform(0.0, rows - 1.0), cx = rng.uniform(0.0, cols - 1.0);
    const double reach = std::hypot(half_u, half_v) + 1.0;
    for (int r = std::max(0, static_cast<int>(cy - reach));
         r <= std::min(rows - 1, static_cast<int>(cy + reach)); ++r) {
        for (int c = std::max(0, static_cast<int>(cx - reach));
             c <= std::min(cols - 1, static_cast<int>(cx + reach)); ++c) {
            const double dy = r - cy, dx = c - cx;
            const double u = dx * ct + dy * st, v = -dx * st + dy * ct;
            if (std::abs(u) <= half_u && std::abs(v) <= half_v) out.at(r, c) = 1;
        }
    }
    return out;
}

}  // namespace

DatasetManifest inject_label_noise(const DatasetManifest& manifest, const NoiseSpec& spec) {
    if (manifest.task != Task::segmentation)
        throw ContractError("inject_label_noise applies to segmentation manifests");
    spec.validate();

    DatasetManifest out = manifest;
    out.noisy_targets = true;

    std::set<std::string> scene_dirs;
    for (const auto& t : manifest.tiles) scene_dirs.insert(t.scene_dir);
    for (const auto& dir : scene_dirs) {
        const MaskGrid clean = read_u8(dir + "/footprint.u8");
        Rng rng(Rng::substream(spec.seed, "label-noise:" + dir));
        MaskGrid noisy = clean;

        const Components comp = connected_components(clean);
        // Component removal.
        std::vector<bool> removed(static_cast<size_t>(comp.count) + 1, false);
        for (int k = 1; k <= comp.count; ++k) removed[k] = rng.coin(spec.p_remove_building);
        for (size_t i = 0; i < noisy.v.size(); ++i)
            if (noisy.v[i] && removed[static_cast<size_t>(comp.labels.v[i])]) noisy.v[i] = 0;
        // Phantom rectangles, one chance per original component.
        for (int k = 1; k <= comp.count; ++k)
            if (rng.coin(spec.p_add_phantom_building)) noisy = rasterize_phantom(noisy, rng);
        // Whole-mask displacement.
        if (spec.max_shift_px > 0) {
            const int dr = rng.below_int(2 * spec.max_shift_px + 1) - spec.max_shift_px;
            const int dc = rng.below_int(2 * spec.max_shift_px + 1) - spec.max_shift_px;
            noisy = shift_mask(noisy, dr, dc);
        }
        // Boundary degradation.
        if (rng.coin(spec.p_boundary_erode_dilate))
            noisy = rng.coin(0.5) ? erode(noisy, 1) : dilate(noisy, 1);

        write_u8(dir + "/footprint_noisy.u8", noisy);
    }
    return out;
}

ElevationRaster ingest_raster(const RasterSource& source, RasterKind kind) {
    const RasterPayload p = source();
    if (p.bands != 1)
        throw DataError("expected a single-band raster, got " + std::to_string(p.bands) +
                        " bands");
    if (!(p.resolution_m > 0)) throw DataError("raster is missing a positive resolution");
    if (p.grid.rows < 1 || p.grid.cols < 1) throw DataError("empty raster");

    ElevationRaster out;
    out.resolution_m = p.resolution_m;
    out.heights = p.grid;
    out.fill_mask = MaskGrid(p.grid.rows, p.grid.cols, 0);

    auto is_void = [&](float x) {
        return !std::isfinite(x) || (p.nodata && x == *p.nodata);
    };

    // Multi-source BFS from valid pixels: nearest-neighbor fill, deterministic
    // tie-break by scan order.
    std::deque<std::pair<int, int>> frontier;
    size_t n_void = 0;
    for (int r = 0; r < out.heights.rows; ++r) {
        for (int c = 0; c < out.heights.cols; ++c) {
            if (is_void(out.heights.at(r, c))) {
                out.fill_mask.at(r, c) = 1;
                ++n_void;
            } else {
                frontier.push_back({r, c});
            }
        }
    }
    if (n_void == out.heights.size()) throw DataError("raster has no valid pixels");
    MaskGrid pending = out.fill_mask;
    while (!frontier.empty()) {
        const auto [r, c] = frontier.front();
        frontier.pop_front();
        constexpr int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
            const int rr = r + dr[k], cc = c + dc[k];
            if (!out.heights.in_bounds(rr, cc) || !pending.at(rr, cc)) continue;
            out.heights.at(rr, cc) = out.heights.at(r, c);
            pending.at(rr, cc) = 0;
            frontier.push_back({rr, cc});
        }
    }
    (void)kind;
    return out;
}

size_t ndsm_violations(const ElevationRaster& dsm, const ElevationRaster& dtm, double eps_m) {
    if (!dsm.heights.same_shape(dtm.heights)) throw ContractError("dsm/dtm shape mismatch");
    size_t n = 0;
    for (size_t i = 0; i < dsm.heights.v.size(); ++i)
        if (dsm.heights.v[i] - dtm.heights.v[i] < -eps_m) ++n;
    return n;
}

void DatasetManifest::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << "# terra-ssl dataset manifest\n";
    f << "# task " << to_string(task) << '\n';
    f << "# seed " << seed << '\n';
    f << "# tile_px " << tile_px << '\n';
    f << "# stride_px " << stride_px << '\n';
    f << "# noisy_targets " << (noisy_targets ? 1 : 0) << '\n';
    f << "# norm_mode " << (norm_mode == NormMode::per_tile_minshift ? "per-tile-minshift" : "global-affine") << '\n';
    for (const auto& t : tiles) {
        char stats[80];
        std::snprintf(stats, sizeof(stats), "%.9g\t%.9g", static_cast<double>(t.norm_offset),
                      static_cast<double>(t.norm_scale));
        f << t.tile_id << '\t' << t.scene_id << '\t' << t.scene_dir << '\t' << t.row << '\t'
          << t.col << '\t' << t.size_px << '\t' << to_string(t.split) << '\t'
          << (t.labeled ? 1 : 0) << '\t' << stats << '\n';
    }
}

DatasetManifest DatasetManifest::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingArtifactError(path);
    DatasetManifest m;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string key;
            ss >> key;
            if (key == "task") {
                std::string v;
                ss >> v;
                m.task = task_from_string(v);
            } else if (key == "seed") {
                ss >> m.seed;
            } else if (key == "tile_px") {
                ss >> m.tile_px;
            } else if (key == "stride_px") {
                ss >> m.stride_px;
            } else if (key == "noisy_targets") {
                int v = 0;
                ss >> v;
                m.noisy_targets = v != 0;
            } else if (key == "norm_mode") {
                std::string v;
                ss >> v;
                m.norm_mode = v == "global-affine" ? NormMode::global_affine
                                                   : NormMode::per_tile_minshift;
            }
            continue;
        }
        std::vector<std::string> parts;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, '\t')) parts.push_back(tok);
        if (parts.size() != 10) throw DataError("malformed manifest line: " + line);
        TileRecord t;
        t.tile_id = parts[0];
        t.scene_id = parts[1];
        t.scene_dir = parts[2];
        t.row = std::stoi(parts[3]);
        t.col = std::stoi(parts[4]);
        t.size_px = std::stoi(parts[5]);
        t.split = split_from_string(parts[6]);
        t.labeled = parts[7] == "1";
        t.norm_offset = std::stof(parts[8]);
        t.norm_scale = std::stof(parts[9]);
        m.tiles.push_back(std::move(t));
    }
    return m;
}

const SceneBundle& SceneCache::get(const std::string& scene_dir) {
    auto it = scenes_.find(scene_dir);
    if (it == scenes_.end()) it = scenes_.emplace(scene_dir, load_scene(scene_dir)).first;
    return it->second;
}

const MaskGrid& SceneCache::get_noisy_mask(const std::string& scene_dir) {
    auto it = noisy_.find(scene_dir);
    if (it == noisy_.end())
        it = noisy_.emplace(scene_dir, read_u8(scene_dir + "/footprint_noisy.u8")).first;
    return it->second;
}

void SceneCache::clear() {
    scenes_.clear();
    noisy_.clear();
}

namespace {

FloatGrid upscale2_bilinear(const FloatGrid& g, int out_rows, int out_cols) {
    FloatGrid out(out_rows, out_cols);
    for (int r = 0; r < out_rows; ++r) {
        for (int c = 0; c < out_cols; ++c) {
            const double sr = std::min(static_cast<double>(g.rows - 1), r * 0.5);
            const double sc = std::min(static_cast<double>(g.cols - 1), c * 0.5);
            const int r0 = static_cast<int>(sr), c0 = static_cast<int>(sc);
            const int r1 = std::min(r0 + 1, g.rows - 1), c1 = std::min(c0 + 1, g.cols - 1);
            const double fr = sr - r0, fc = sc - c0;
            out.at(r, c) = static_cast<float>(
                (1 - fr) * ((1 - fc) * g.at(r0, c0) + fc * g.at(r0, c1)) +
                fr * ((1 - fc) * g.at(r1, c0) + fc * g.at(r1, c1)));
        }
    }
    return out;
}

MaskGrid upscale2_nearest(const MaskGrid& g, int out_rows, int out_cols) {
    MaskGrid out(out_rows, out_cols);
    for (int r = 0; r < out_rows; ++r)
        for (int c = 0; c < out_cols; ++c)
            out.at(r, c) = g.at(std::min(r / 2, g.rows - 1), std::min(c / 2, g.cols - 1));
    return out;
}

}  // namespace

TileData load_tile(const DatasetManifest& manifest, const TileRecord& tile, SceneCache& cache,
                   const TileView& view) {
    const SceneBundle& scene = cache.get(tile.scene_dir);
    const int n = tile.size_px;
    int r0 = tile.row, c0 = tile.col, win = n;
    if (view.input_upscale == 2) {
        // Center crop at half size; the upscale below restores the tile size,
        // emulating data at twice the ground resolution.
        win = n / 2;
        r0 += (n - win) / 2;
        c0 += (n - win) / 2;
    } else if (view.input_upscale != 1) {
        throw ConfigError("input_upscale must be 1 or 2");
    }

    TileData out;
    const FloatGrid& input_src =
        manifest.task == Task::pretext ? scene.dsm.heights : scene.ndsm.heights;
    FloatGrid input = input_src.window(r0, c0, win, win);
    if (manifest.task == Task::pretext) {
        FloatGrid target = scene.dtm.heights.window(r0, c0, win, win);
        if (view.input_upscale == 2) {
            input = upscale2_bilinear(input, n, n);
            target = upscale2_bilinear(target, n, n);
        }
        out.target_f = std::move(target);
    } else {
        MaskGrid clean = scene.footprint.window(r0, c0, win, win);
        MaskGrid target = manifest.noisy_targets
                              ? cache.get_noisy_mask(tile.scene_dir).window(r0, c0, win, win)
                              : clean;
        if (view.input_upscale == 2) {
            input = upscale2_bilinear(input, n, n);
            clean = upscale2_nearest(clean, n, n);
            target = upscale2_nearest(target, n, n);
        }
        out.clean_mask = std::move(clean);
        out.target_mask = std::move(target);
    }

    // Input (and pretext target) into the tile's normalization frame.
    const float off = tile.norm_offset, scale = tile.norm_scale;
    for (auto& x : input.v) x = (x - off) / scale;
    out.input = std::move(input);
    if (manifest.task == Task::pretext)
        for (auto& x : out.target_f.v) x = (x - off) / scale;
    return out;
}

}  // namespace terra

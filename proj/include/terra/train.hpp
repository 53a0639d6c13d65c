#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "terra/dataset.hpp"
#include "terra/metrics.hpp"
#include "terra/nn/losses.hpp"
#include "terra/nn/net.hpp"
#include "terra/nn/optim.hpp"

namespace terra {

struct PretrainConfig {
    double lr = 1e-6;  // paper recipe; desk configs override
    double weight_decay = 1e-8;
    int batch = 4;  // paper uses 8; desk default 4
    int plateau_patience = 10;
    double plateau_factor = 0.1;
    double plateau_min_delta = 1e-5;
    double clip_norm = 1.0;
    int max_epochs = 60;
    double lambda_perceptual = 1.0;
    double smooth_l1_beta = 1.0;
    int max_steps_per_epoch = 0;  // 0 = every tile every epoch
    int max_val_tiles = 0;        // 0 = all
    uint64_t seed = 0;

    void validate() const;
};

struct FinetuneConfig {
    double lr = 1e-6;  // paper recipe; desk configs override
    double weight_decay = 1e-8;
    double rms_momentum = 0.999;
    nn::RmsMomentumMode momentum_mode = nn::RmsMomentumMode::smoothing;
    int batch = 4;
    int plateau_patience = 15;
    double plateau_factor = 0.1;
    double plateau_min_delta = 1e-5;
    double clip_norm = 0.0;  // 0 disables; the paper clips only in pretraining
    int max_epochs = 40;
    bool monitor_validation = true;  // plateau on validation loss (flag per spec note)
    bool auto_class_weights = true;  // inverse pixel frequency on the labeled subset
    double class_weight_background = 1.0;
    double class_weight_building = 1.0;
    double dice_eps = 1e-6;
    double lambda_unused = 0.0;
    int max_steps_per_epoch = 0;
    int max_val_tiles = 0;
    int input_upscale = 1;  // 2 = resolution-shift protocol
    uint64_t seed = 0;

    void validate() const;
};

// Resumable optimization state; saved with the "last" checkpoint each epoch.
struct TrainState {
    long step = 0;
    int epoch = 0;
    double best_val = 1e300;
    double lr = 0.0;
    int stagnant = 0;
    Rng::State rng;
};

struct TrainResult {
    nn::ModelParameters best;
    MetricsReport log;
    double epoch1_val_loss = 0.0;
    double final_val_loss = 0.0;
    std::vector<double> train_loss_per_epoch;
};

// DSM -> DTM pretext pretraining (or the proxy task when the manifest points
// at proxy scenes). Writes checkpoints/{best,last} and metrics.tsv under
// run_dir when non-empty; resumes from checkpoints/last when resume is set.
TrainResult pretrain(const nn::ModelParameters& init, const DatasetManifest& manifest,
                     const PretrainConfig& config, const std::string& run_dir = "",
                     nn::Provenance provenance = nn::Provenance::terrain_pretrained,
                     bool resume = false);

// Full fine-tuning on the labeled subset of a segmentation manifest.
TrainResult finetune(const nn::ModelParameters& init, const DatasetManifest& manifest,
                     const FinetuneConfig& config, const std::string& run_dir = "",
                     bool resume = false);

struct EvalOptions {
    int input_upscale = 1;
    int biou_d = 2;
    bool oracle = false;  // debug: predictions := targets
};

// Per-tile IoU/bIoU/Score plus aggregate means. When the manifest carries
// noisy targets, scores against both noisy and clean masks.
MetricsReport evaluate(const nn::ModelParameters& params, const DatasetManifest& manifest,
                       Split split, const EvalOptions& opts = {});

// Pretext quality proxy: masks thresholded at |DSM - prediction| > threshold_m
// versus |DSM - DTM| > threshold_m, scored with IoU/bIoU.
MetricsReport evaluate_pretext(const nn::ModelParameters& params, const DatasetManifest& manifest,
                               Split split, double threshold_m = 1.0, int biou_d = 2);

// Unrelated-pretext proxy corpus: scenes whose DSM == DTM == a block-shuffled
// spectral texture, so pretext pairs become identity-autoencoding tiles.
void make_proxy_scenes(const std::string& scenes_dir, int n_scenes, int size_px, uint64_t seed);

// Pretrains on the proxy manifest with the same budget; provenance proxy-pretrained.
TrainResult make_proxy_init(const nn::ModelParameters& init, const DatasetManifest& manifest,
                            const PretrainConfig& config, const std::string& run_dir = "");

struct ComparisonCell {
    std::string init;
    double fraction = 1.0;
    uint64_t seed = 0;
    double test_iou = 0.0, test_biou = 0.0, test_score = 0.0;
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_iou;     // per epoch
};

struct ComparisonReport {
    std::vector<ComparisonCell> cells;

    double median_iou(const std::string& init, double fraction) const;
    std::vector<double> median_train_loss(const std::string& init, double fraction) const;
    std::string table_text() const;   // rows = init x fraction, cols = IoU/bIoU/Score
    std::string table_tsv() const;
    void save(const std::string& dir) const;
};

// Identical fine-tuning for each provided init x fraction x seed.
ComparisonReport compare_inits(const std::map<std::string, nn::ModelParameters>& inits,
                               const DatasetManifest& train_manifest,
                               const std::vector<double>& fractions,
                               const std::vector<uint64_t>& seeds, const FinetuneConfig& base,
                               const EvalOptions& eval_opts = {},
                               const std::string& out_dir = "");

}  // namespace terra

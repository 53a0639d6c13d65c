#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "terra/nn/layers.hpp"
#include "terra/rng.hpp"

namespace terra::nn {

enum class Head : uint8_t { reconstruction = 0, segmentation = 1 };
enum class Provenance : uint8_t { random = 0, proxy_pretrained = 1, terrain_pretrained = 2 };

std::string to_string(Head h);
std::string to_string(Provenance p);
Head head_from_string(const std::string& s);
Provenance provenance_from_string(const std::string& s);

struct ModelConfig {
    int in_channels = 1;
    int base_width = 16;
    int depth = 4;  // down-stages; channels double per stage
    int blocks_per_stage = 1;
    int se_reduction = 16;
    Head head = Head::reconstruction;
    int num_classes = 2;

    void validate() const {
        if (base_width < 4) throw ConfigError("base_width must be >= 4");
        if (depth < 2) throw ConfigError("depth must be >= 2");
        if (blocks_per_stage < 1) throw ConfigError("blocks_per_stage must be >= 1");
        if (se_reduction < 1 || base_width % se_reduction != 0)
            throw ConfigError("se_reduction must divide base_width");
        if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
        if (head == Head::segmentation && num_classes < 2)
            throw ConfigError("segmentation needs num_classes >= 2");
    }

    bool same_backbone(const ModelConfig& o) const {
        return in_channels == o.in_channels && base_width == o.base_width && depth == o.depth &&
               blocks_per_stage == o.blocks_per_stage && se_reduction == o.se_reduction;
    }

    int stage_width(int level) const { return base_width << level; }  // level 0..depth
    int out_channels() const { return head == Head::reconstruction ? 1 : num_classes; }

    std::string describe() const;
    uint64_t hash() const { return Rng::hash_str(describe()); }
};

// Named, shaped parameter set: the unit of transfer and checkpointing.
// Buffers (batch-norm running stats) ride along but do not count as parameters.
struct ModelParameters {
    ModelConfig config;
    Provenance provenance = Provenance::random;
    std::vector<std::pair<std::string, Tensor<float>>> tensors;
    std::vector<std::string> buffer_names;

    bool is_buffer(const std::string& name) const {
        for (const auto& b : buffer_names)
            if (b == name) return true;
        return false;
    }
    const Tensor<float>* find(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return &t;
        return nullptr;
    }
    size_t parameter_count() const {
        size_t n = 0;
        for (const auto& [name, t] : tensors)
            if (!is_buffer(name)) n += t.numel();
        return n;
    }
};

// Closed-form parameter count from the layer table (no tensors allocated).
size_t expected_parameter_count(const ModelConfig& config);

template <typename T>
struct ResBlock {
    Conv2d<T> conv1, conv2;
    BatchNorm2d<T> bn1, bn2;
    ReLU<T> relu1, relu2;

    ResBlock() = default;
    explicit ResBlock(int ch)
        : conv1(ch, ch, 3), conv2(ch, ch, 3), bn1(ch), bn2(ch) {}

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        Tensor<T> y = relu1.forward(bn1.forward(conv1.forward(x), training));
        y = bn2.forward(conv2.forward(y), training);
        for (size_t i = 0; i < y.v.size(); ++i) y.v[i] += x.v[i];
        return relu2.forward(y);
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        const Tensor<T> dsum = relu2.backward(dy);
        Tensor<T> dx = conv1.backward(bn1.backward(relu1.backward(conv2.backward(
            bn2.backward(dsum)))));
        for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dsum.v[i];
        return dx;
    }
    void collect(const std::string& p, std::vector<ParamRef<T>>& out) {
        conv1.collect(p + ".conv1", out);
        bn1.collect(p + ".bn1", out);
        conv2.collect(p + ".conv2", out);
        bn2.collect(p + ".bn2", out);
    }
};

template <typename T>
struct EncStage {
    Conv2d<T> down;
    BatchNorm2d<T> bn;
    ReLU<T> relu;
    std::vector<ResBlock<T>> blocks;
    SEBlock<T> se;

    EncStage() = default;
    EncStage(int in_ch, int out_ch, int n_blocks, int reduction)
        : down(in_ch, out_ch, 3, 2), bn(out_ch), se(out_ch, reduction) {
        for (int i = 0; i < n_blocks; ++i) blocks.emplace_back(out_ch);
    }
    Tensor<T> forward(const Tensor<T>& x, bool training) {
        Tensor<T> y = relu.forward(bn.forward(down.forward(x), training));
        for (auto& b : blocks) y = b.forward(y, training);
        return se.forward(y);
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> g = se.backward(dy);
        for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) g = it->backward(g);
        return down.backward(bn.backward(relu.backward(g)));
    }
    void collect(const std::string& p, std::vector<ParamRef<T>>& out) {
        down.collect(p + ".down", out);
        bn.collect(p + ".down_bn", out);
        for (size_t i = 0; i < blocks.size(); ++i)
            blocks[i].collect(p + ".res" + std::to_string(i), out);
        se.collect(p + ".se", out);
    }
};

template <typename T>
struct DecStage {
    Upsample2xNearest<T> up;
    Conv2d<T> conv;
    BatchNorm2d<T> bn;
    ReLU<T> relu;
    Conv2d<T> fuse;
    BatchNorm2d<T> fuse_bn;
    ReLU<T> fuse_relu;
    SEBlock<T> se;
    int out_ch = 0;

    DecStage() = default;
    DecStage(int in_ch, int out_channels, int reduction)
        : conv(in_ch, out_channels, 3),
          bn(out_channels),
          fuse(2 * out_channels, out_channels, 3),
          fuse_bn(out_channels),
          se(out_channels, reduction),
          out_ch(out_channels) {}

    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& skip, bool training) {
        Tensor<T> u = relu.forward(bn.forward(conv.forward(up.forward(x)), training));
        Tensor<T> cat({u.n(), 2 * out_ch, u.h(), u.w()});
        for (int i = 0; i < u.n(); ++i) {
            std::copy_n(&u.at(i, 0, 0, 0), static_cast<size_t>(out_ch) * u.h() * u.w(),
                        &cat.at(i, 0, 0, 0));
            std::copy_n(&skip.at(i, 0, 0, 0), static_cast<size_t>(out_ch) * u.h() * u.w(),
                        &cat.at(i, out_ch, 0, 0));
        }
        return se.forward(fuse_relu.forward(fuse_bn.forward(fuse.forward(cat), training)));
    }
    // Returns (dx toward the deeper stage, dskip toward the encoder feature).
    std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& dy) {
        const Tensor<T> dcat =
            fuse.backward(fuse_bn.backward(fuse_relu.backward(se.backward(dy))));
        Tensor<T> du({dcat.n(), out_ch, dcat.h(), dcat.w()});
        Tensor<T> dskip({dcat.n(), out_ch, dcat.h(), dcat.w()});
        const size_t plane = static_cast<size_t>(out_ch) * dcat.h() * dcat.w();
        for (int i = 0; i < dcat.n(); ++i) {
            std::copy_n(&dcat.at(i, 0, 0, 0), plane, &du.at(i, 0, 0, 0));
            std::copy_n(&dcat.at(i, out_ch, 0, 0), plane, &dskip.at(i, 0, 0, 0));
        }
        Tensor<T> dx = up.backward(conv.backward(bn.backward(relu.backward(du))));
        return {std::move(dx), std::move(dskip)};
    }
    void collect(const std::string& p, std::vector<ParamRef<T>>& out) {
        conv.collect(p + ".up", out);
        bn.collect(p + ".up_bn", out);
        fuse.collect(p + ".fuse", out);
        fuse_bn.collect(p + ".fuse_bn", out);
        se.collect(p + ".se", out);
    }
};

// The Fig.-3-style network: residual encoder, skip-connected decoder, SE
// channel attention, exchangeable task head. Output spatial shape equals the
// input's for both heads.
template <typename T>
class UNet {
  public:
    explicit UNet(const ModelConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        stem_ = Conv2d<T>(cfg.in_channels, cfg.base_width, 3);
        stem_bn_ = BatchNorm2d<T>(cfg.base_width);
        for (int i = 0; i < cfg.depth; ++i)
            enc_.emplace_back(cfg.stage_width(i), cfg.stage_width(i + 1), cfg.blocks_per_stage,
                              cfg.se_reduction);
        for (int j = cfg.depth - 1; j >= 0; --j)
            dec_.emplace_back(cfg.stage_width(j + 1), cfg.stage_width(j), cfg.se_reduction);
        if (cfg.head == Head::reconstruction) {
            head_out_ = Conv2d<T>(cfg.base_width, 1, 1, 1, true);
        } else {
            head_conv_ = Conv2d<T>(cfg.base_width, cfg.base_width, 3);
            head_bn_ = BatchNorm2d<T>(cfg.base_width);
            head_out_ = Conv2d<T>(cfg.base_width, cfg.num_classes, 1, 1, true);
        }
        build_param_index();
    }

    const ModelConfig& config() const { return cfg_; }

    // He fan-in initialization for kernels, zeros for biases, identity batch
    // norm. Deterministic in the seed; backbone draws come before head draws.
    void init(uint64_t seed) {
        Rng rng(Rng::substream(seed, "model-init"));
        for (auto& p : params_) {
            if (p.is_buffer) continue;
            auto& t = *p.value;
            const bool is_weight = p.name.size() > 2 && p.name.ends_with(".w");
            if (is_weight) {
                int fan_in = 1;
                if (t.rank == 4)
                    fan_in = t.dims[1] * t.dims[2] * t.dims[3];
                else if (t.rank == 2)
                    fan_in = t.dims[1];
                const double std = std::sqrt(2.0 / fan_in);
                for (auto& x : t.v) x = static_cast<T>(rng.normal() * std);
            } else if (p.name.ends_with(".gamma")) {
                for (auto& x : t.v) x = T(1);
            } else {
                t.zero();
            }
        }
    }

    Tensor<T> forward(const Tensor<T>& x, bool training,
                      std::vector<Tensor<T>>* feature_maps = nullptr) {
        if (x.rank != 4 || x.c() != cfg_.in_channels)
            throw ContractError("forward expects NCHW input with " +
                                std::to_string(cfg_.in_channels) + " channel(s)");
        const int div = 1 << cfg_.depth;
        if (x.h() % div != 0 || x.w() % div != 0)
            throw ContractError("input " + std::to_string(x.h()) + "x" + std::to_string(x.w()) +
                                " not divisible by 2^depth = " + std::to_string(div));
        feats_.clear();
        feats_.push_back(stem_relu_.forward(stem_bn_.forward(stem_.forward(x), training)));
        for (auto& stage : enc_) feats_.push_back(stage.forward(feats_.back(), training));
        Tensor<T> y = feats_.back();
        for (size_t d = 0; d < dec_.size(); ++d)
            y = dec_[d].forward(y, feats_[dec_.size() - 1 - d], training);
        if (feature_maps) *feature_maps = feats_;
        if (cfg_.head == Head::reconstruction) return head_out_.forward(y);
        return head_out_.forward(
            head_relu_.forward(head_bn_.forward(head_conv_.forward(y), training)));
    }

    // Accumulates parameter gradients; returns the input gradient.
    Tensor<T> backward(const Tensor<T>& dout) {
        Tensor<T> dy = head_out_.backward(dout);
        if (cfg_.head == Head::segmentation)
            dy = head_conv_.backward(head_bn_.backward(head_relu_.backward(dy)));
        std::vector<Tensor<T>> dskips(dec_.size());
        for (size_t d = dec_.size(); d-- > 0;) {
            auto [dx, dskip] = dec_[dec_.size() - 1 - d].backward(dy);
            dy = std::move(dx);
            dskips[d] = std::move(dskip);
        }
        // dy is now the bottleneck gradient; walk the encoder back, adding the
        // skip contribution at each level.
        for (size_t i = enc_.size(); i-- > 0;) {
            Tensor<T> g = enc_[i].backward(dy);
            for (size_t k = 0; k < g.v.size(); ++k) g.v[k] += dskips[i].v[k];
            dy = std::move(g);
        }
        return stem_.backward(stem_bn_.backward(stem_relu_.backward(dy)));
    }

    void zero_grad() {
        for (auto& p : params_)
            if (p.grad) p.grad->zero();
    }

    std::vector<ParamRef<T>>& params() { return params_; }

    ModelParameters to_parameters(Provenance prov) const {
        ModelParameters mp;
        mp.config = cfg_;
        mp.provenance = prov;
        for (const auto& p : params_) {
            mp.tensors.emplace_back(p.name, p.value->template cast<float>());
            if (p.is_buffer) mp.buffer_names.push_back(p.name);
        }
        return mp;
    }

    void load_parameters(const ModelParameters& mp) {
        if (mp.tensors.size() != params_.size())
            throw TransferError("parameter set has " + std::to_string(mp.tensors.size()) +
                                " tensors, model expects " + std::to_string(params_.size()));
        for (size_t i = 0; i < params_.size(); ++i) {
            const auto& [name, t] = mp.tensors[i];
            if (name != params_[i].name)
                throw TransferError("tensor name mismatch: " + name + " vs " + params_[i].name);
            auto cast = t.template cast<T>();
            if (!cast.same_shape(*params_[i].value))
                throw TransferError("tensor shape mismatch for " + name + ": " + t.shape_str() +
                                    " vs " + params_[i].value->shape_str());
            *params_[i].value = std::move(cast);
        }
    }

    const Tensor<T>& encoder_se_gates(int stage) const { return enc_[stage].se.last_gates(); }

  private:
    void build_param_index() {
        params_.clear();
        stem_.collect("stem.conv", params_);
        stem_bn_.collect("stem.bn", params_);
        for (size_t i = 0; i < enc_.size(); ++i)
            enc_[i].collect("enc" + std::to_string(i), params_);
        for (size_t d = 0; d < dec_.size(); ++d)
            dec_[d].collect("dec" + std::to_string(dec_.size() - 1 - d), params_);
        if (cfg_.head == Head::reconstruction) {
            head_out_.collect("head.recon.out", params_);
        } else {
            head_conv_.collect("head.seg.conv", params_);
            head_bn_.collect("head.seg.bn", params_);
            head_out_.collect("head.seg.out", params_);
        }
    }

    ModelConfig cfg_;
    Conv2d<T> stem_;
    BatchNorm2d<T> stem_bn_;
    ReLU<T> stem_relu_;
    std::vector<EncStage<T>> enc_;
    std::vector<DecStage<T>> dec_;  // dec_[0] is the deepest stage
    Conv2d<T> head_conv_;
    BatchNorm2d<T> head_bn_;
    ReLU<T> head_relu_;
    Conv2d<T> head_out_;
    std::vector<Tensor<T>> feats_;
    std::vector<ParamRef<T>> params_;
};

// Deterministic fresh model.
ModelParameters build_model(const ModelConfig& config, uint64_t seed);

// Copies every non-head tensor exactly; the head is freshly initialized from
// head_seed; provenance carries over from the source.
ModelParameters transfer_weights(const ModelParameters& source, Head target_head,
                                 uint64_t head_seed = 1);
ModelParameters transfer_weights(const ModelParameters& source, const ModelConfig& target_config,
                                 uint64_t head_seed = 1);

}  // namespace terra::nn

#include "terra/nn/net.hpp"

#include <sstream>

namespace terra::nn {

std::string to_string(Head h) {
    return h == Head::reconstruction ? "reconstruction" : "segmentation";
}
std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::random: return "random";
        case Provenance::proxy_pretrained: return "proxy-pretrained";
        default: return "terrain-pretrained";
    }
}
Head head_from_string(const std::string& s) {
    if (s == "reconstruction") return Head::reconstruction;
    if (s == "segmentation") return Head::segmentation;
    throw ConfigError("unknown head '" + s + "'");
}
Provenance provenance_from_string(const std::string& s) {
    if (s == "random") return Provenance::random;
    if (s == "proxy-pretrained") return Provenance::proxy_pretrained;
    if (s == "terrain-pretrained") return Provenance::terrain_pretrained;
    throw ConfigError("unknown provenance '" + s + "'");
}

std::string ModelConfig::describe() const {
    std::ostringstream os;
    os << "in=" << in_channels << " width=" << base_width << " depth=" << depth
       << " blocks=" << blocks_per_stage << " se=" << se_reduction
       << " head=" << to_string(head) << " classes=" << num_classes;
    return os.str();
}

size_t expected_parameter_count(const ModelConfig& cfg) {
    cfg.validate();
    auto conv = [](size_t co, size_t ci, size_t k, bool bias) {
        return co * ci * k * k + (bias ? co : 0);
    };
    auto bn = [](size_t c) { return 2 * c; };
    auto se = [&](size_t c) {
        const size_t mid = c / static_cast<size_t>(cfg.se_reduction);
        return mid * c + mid + c * mid + c;
    };
    const auto w = static_cast<size_t>(cfg.base_width);
    size_t total = conv(w, cfg.in_channels, 3, false) + bn(w);  // stem
    for (int i = 0; i < cfg.depth; ++i) {
        const size_t ci = w << i, co = w << (i + 1);
        total += conv(co, ci, 3, false) + bn(co);
        total += static_cast<size_t>(cfg.blocks_per_stage) *
                 (2 * conv(co, co, 3, false) + 2 * bn(co));
        total += se(co);
    }
    for (int j = cfg.depth - 1; j >= 0; --j) {
        const size_t ci = w << (j + 1), co = w << j;
        total += conv(co, ci, 3, false) + bn(co);       // up path
        total += conv(co, 2 * co, 3, false) + bn(co);   // fuse after concat
        total += se(co);
    }
    if (cfg.head == Head::reconstruction) {
        total += conv(1, w, 1, true);
    } else {
        total += conv(w, w, 3, false) + bn(w) + conv(cfg.num_classes, w, 1, true);
    }
    return total;
}

ModelParameters build_model(const ModelConfig& config, uint64_t seed) {
    UNet<float> net(config);
    net.init(seed);
    return net.to_parameters(Provenance::random);
}

ModelParameters transfer_weights(const ModelParameters& source, const ModelConfig& target_config,
                                 uint64_t head_seed) {
    target_config.validate();
    if (!source.config.same_backbone(target_config))
        throw TransferError("source and target configs differ beyond the head: " +
                            source.config.describe() + " vs " + target_config.describe());
    ModelParameters target = build_model(target_config, head_seed);
    target.provenance = source.provenance;
    for (auto& [name, t] : target.tensors) {
        if (name.rfind("head.", 0) == 0) continue;  // task-specific layers stay fresh
        const Tensor<float>* src = source.find(name);
        if (!src) throw TransferError("source parameters missing tensor " + name);
        if (!src->same_shape(t))
            throw TransferError("shape mismatch for " + name + ": " + src->shape_str() + " vs " +
                                t.shape_str());
        t = *src;
    }
    return target;
}

ModelParameters transfer_weights(const ModelParameters& source, Head target_head,
                                 uint64_t head_seed) {
    ModelConfig cfg = source.config;
    cfg.head = target_head;
    return transfer_weights(source, cfg, head_seed);
}

}  // namespace terra::nn

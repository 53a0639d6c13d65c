#pragma once

#include <string>
#include <utility>
#include <vector>

#include "terra/nn/net.hpp"
#include "terra/raster_io.hpp"

namespace terra {

// Checkpoint directory: ordered text manifest (config, provenance, step count,
// metric snapshot, tensor list) plus one binary blob per named tensor
// (little-endian float32 with a shape header). Save/load round-trips bit-exactly.
void write_tensor_blob(const std::string& path, const nn::Tensor<float>& t);
nn::Tensor<float> read_tensor_blob(const std::string& path);

using NamedTensors = std::vector<std::pair<std::string, nn::Tensor<float>>>;

void save_checkpoint(const std::string& dir, const nn::ModelParameters& params,
                     const KvMap& extra = {}, const NamedTensors& opt_state = {});

nn::ModelParameters load_checkpoint(const std::string& dir, KvMap* extra = nullptr,
                                    NamedTensors* opt_state = nullptr);

}  // namespace terra

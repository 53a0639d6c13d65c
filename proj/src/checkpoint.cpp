#include "terra/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

namespace terra {

namespace {
constexpr uint32_t kTensorMagic = 0x54423332;  // "TB32"
}

void write_tensor_blob(const std::string& path, const nn::Tensor<float>& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    uint32_t header[6] = {kTensorMagic, static_cast<uint32_t>(t.rank), 1, 1, 1, 1};
    for (int i = 0; i < t.rank; ++i) header[2 + i] = static_cast<uint32_t>(t.dims[i]);
    f.write(reinterpret_cast<const char*>(header), sizeof(header));
    f.write(reinterpret_cast<const char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(float)));
    if (!f) throw IoError("short write to " + path);
}

nn::Tensor<float> read_tensor_blob(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingArtifactError(path);
    uint32_t header[6];
    f.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!f || header[0] != kTensorMagic) throw DataError("bad tensor blob " + path);
    const int rank = static_cast<int>(header[1]);
    if (rank < 1 || rank > 4) throw DataError("bad tensor rank in " + path);
    nn::Tensor<float> t;
    switch (rank) {
        case 1: t.resize({static_cast<int>(header[2])}); break;
        case 2: t.resize({static_cast<int>(header[2]), static_cast<int>(header[3])}); break;
        case 3:
            t.resize({static_cast<int>(header[2]), static_cast<int>(header[3]),
                      static_cast<int>(header[4])});
            break;
        default:
            t.resize({static_cast<int>(header[2]), static_cast<int>(header[3]),
                      static_cast<int>(header[4]), static_cast<int>(header[5])});
    }
    f.read(reinterpret_cast<char*>(t.v.data()),
           static_cast<std::streamsize>(t.v.size() * sizeof(float)));
    if (!f) throw DataError("truncated tensor blob " + path);
    return t;
}

void save_checkpoint(const std::string& dir, const nn::ModelParameters& params,
                     const KvMap& extra, const NamedTensors& opt_state) {
    ensure_dir(dir);
    std::ofstream f(dir + "/checkpoint.txt", std::ios::binary);
    if (!f) throw IoError("cannot write " + dir + "/checkpoint.txt");
    const auto& c = params.config;
    f << "format terra-ssl-checkpoint-1\n";
    f << "config.in_channels " << c.in_channels << '\n';
    f << "config.base_width " << c.base_width << '\n';
    f << "config.depth " << c.depth << '\n';
    f << "config.blocks_per_stage " << c.blocks_per_stage << '\n';
    f << "config.se_reduction " << c.se_reduction << '\n';
    f << "config.head " << nn::to_string(c.head) << '\n';
    f << "config.num_classes " << c.num_classes << '\n';
    f << "config.hash " << c.hash() << '\n';
    f << "provenance " << nn::to_string(params.provenance) << '\n';
    for (const auto& [k, v] : extra) f << "extra." << k << ' ' << v << '\n';
    for (const auto& [name, t] : params.tensors)
        f << (params.is_buffer(name) ? "buffer " : "tensor ") << name << '\n';
    for (const auto& [name, t] : opt_state) f << "optstate " << name << '\n';
    for (const auto& [name, t] : params.tensors) write_tensor_blob(dir + "/" + name + ".bin", t);
    for (const auto& [name, t] : opt_state) write_tensor_blob(dir + "/" + name + ".bin", t);
}

nn::ModelParameters load_checkpoint(const std::string& dir, KvMap* extra,
                                    NamedTensors* opt_state) {
    std::ifstream f(dir + "/checkpoint.txt", std::ios::binary);
    if (!f) throw MissingArtifactError(dir + "/checkpoint.txt");
    nn::ModelParameters mp;
    std::vector<std::string> tensor_names, opt_names;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const size_t sp = line.find(' ');
        if (sp == std::string::npos) continue;
        const std::string key = line.substr(0, sp), val = line.substr(sp + 1);
        auto& c = mp.config;
        if (key == "config.in_channels") c.in_channels = std::stoi(val);
        else if (key == "config.base_width") c.base_width = std::stoi(val);
        else if (key == "config.depth") c.depth = std::stoi(val);
        else if (key == "config.blocks_per_stage") c.blocks_per_stage = std::stoi(val);
        else if (key == "config.se_reduction") c.se_reduction = std::stoi(val);
        else if (key == "config.head") c.head = nn::head_from_string(val);
        else if (key == "config.num_classes") c.num_classes = std::stoi(val);
        else if (key == "provenance") mp.provenance = nn::provenance_from_string(val);
        else if (key == "tensor") tensor_names.push_back(val);
        else if (key == "buffer") {
            tensor_names.push_back(val);
            mp.buffer_names.push_back(val);
        } else if (key == "optstate") opt_names.push_back(val);
        else if (key.rfind("extra.", 0) == 0 && extra) (*extra)[key.substr(6)] = val;
    }
    for (const auto& name : tensor_names)
        mp.tensors.emplace_back(name, read_tensor_blob(dir + "/" + name + ".bin"));
    if (opt_state)
        for (const auto& name : opt_names)
            opt_state->emplace_back(name, read_tensor_blob(dir + "/" + name + ".bin"));
    return mp;
}

}  // namespace terra

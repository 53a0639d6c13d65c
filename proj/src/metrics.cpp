#include "terra/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "terra/errors.hpp"
#include "terra/morph.hpp"

namespace terra {

double iou(const MaskGrid& pred, const MaskGrid& gt) {
    if (!pred.same_shape(gt)) throw ContractError("iou: shape mismatch");
    require_binary(pred, "iou pred");
    require_binary(gt, "iou gt");
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        const bool p = pred.v[i] != 0, g = gt.v[i] != 0;
        inter += (p && g);
        uni += (p || g);
    }
    if (uni == 0) return 1.0;  // both empty
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double boundary_iou(const MaskGrid& pred, const MaskGrid& gt, int d) {
    if (d < 1) throw ConfigError("boundary_iou: thickness d must be >= 1");
    if (!pred.same_shape(gt)) throw ContractError("boundary_iou: shape mismatch");
    require_binary(pred, "boundary_iou pred");
    require_binary(gt, "boundary_iou gt");
    return iou(boundary_band(pred, d), boundary_band(gt, d));
}

double score(double iou_value, double biou_value) { return 0.5 * (iou_value + biou_value); }

void MetricsRow::set(const std::string& key, double value) {
    for (auto& kv : values) {
        if (kv.first == key) {
            kv.second = value;
            return;
        }
    }
    values.emplace_back(key, value);
}

const double* MetricsRow::find(const std::string& key) const {
    for (const auto& kv : values)
        if (kv.first == key) return &kv.second;
    return nullptr;
}

MetricsRow& MetricsReport::add(const std::string& split, long step) {
    rows.push_back(MetricsRow{split, step, {}});
    return rows.back();
}

double MetricsReport::mean(const std::string& key, const std::string& split) const {
    double sum = 0.0;
    size_t n = 0;
    for (const auto& row : rows) {
        if (!split.empty() && row.split != split) continue;
        if (const double* v = row.find(key)) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) throw ContractError("metrics: no rows with key '" + key + "'");
    return sum / static_cast<double>(n);
}

static std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string MetricsReport::to_tsv() const {
    // Column order: first appearance across rows.
    std::vector<std::string> cols;
    for (const auto& row : rows) {
        for (const auto& kv : row.values) {
            bool seen = false;
            for (const auto& c : cols) seen = seen || c == kv.first;
            if (!seen) cols.push_back(kv.first);
        }
    }
    std::ostringstream os;
    os << "split\tstep";
    for (const auto& c : cols) os << '\t' << c;
    os << '\n';
    for (const auto& row : rows) {
        os << row.split << '\t' << row.step;
        for (const auto& c : cols) {
            const double* v = row.find(c);
            os << '\t' << (v ? format_value(*v) : "");
        }
        os << '\n';
    }
    return os.str();
}

void MetricsReport::save_tsv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << to_tsv();
}

MetricsReport MetricsReport::load_tsv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingArtifactError(path);
    MetricsReport rep;
    std::string line;
    std::vector<std::string> cols;
    bool header = true;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<std::string> parts;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, '\t')) parts.push_back(tok);
        if (header) {
            for (size_t i = 2; i < parts.size(); ++i) cols.push_back(parts[i]);
            header = false;
            continue;
        }
        if (parts.size() < 2) continue;
        auto& row = rep.add(parts[0], std::stol(parts[1]));
        for (size_t i = 2; i < parts.size() && i - 2 < cols.size(); ++i)
            if (!parts[i].empty()) row.set(cols[i - 2], std::stod(parts[i]));
    }
    return rep;
}

}  // namespace terra

#pragma once

#include <map>
#include <string>
#include <vector>

#include "terra/grid.hpp"

namespace terra {

// |P ∩ G| / |P ∪ G| over binary masks. Both-empty convention: 1.0.
double iou(const MaskGrid& pred, const MaskGrid& gt);

// IoU restricted to the inner boundary bands of thickness d (d >= 1).
double boundary_iou(const MaskGrid& pred, const MaskGrid& gt, int d = 2);

// Arithmetic mean of IoU and bIoU, the Score column convention.
double score(double iou_value, double biou_value);

// One row of a run's metric log. Columns are name -> value; row identity is
// (split, step). Exported as UTF-8 TSV so downstream plotting stays trivial.
struct MetricsRow {
    std::string split;
    long step = 0;
    std::vector<std::pair<std::string, double>> values;

    void set(const std::string& key, double value);
    const double* find(const std::string& key) const;
};

struct MetricsReport {
    std::vector<MetricsRow> rows;

    MetricsRow& add(const std::string& split, long step);
    // Mean of `key` over rows matching split (all rows when split empty).
    double mean(const std::string& key, const std::string& split = "") const;
    std::string to_tsv() const;
    void save_tsv(const std::string& path) const;
    static MetricsReport load_tsv(const std::string& path);
};

}  // namespace terra

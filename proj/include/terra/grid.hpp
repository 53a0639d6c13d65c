#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "terra/errors.hpp"

namespace terra {

// Dense row-major 2-D grid. The carrier for rasters and masks.
template <typename T>
struct Grid {
    int rows = 0;
    int cols = 0;
    std::vector<T> v;

    Grid() = default;
    Grid(int r, int c, T fill = T{}) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

    T& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    const T& at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

    size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }
    bool same_shape(const Grid& o) const { return rows == o.rows && cols == o.cols; }
    bool in_bounds(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }

    Grid window(int r0, int c0, int h, int w) const {
        if (r0 < 0 || c0 < 0 || r0 + h > rows || c0 + w > cols)
            throw ContractError("window out of bounds");
        Grid out(h, w);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) out.at(r, c) = at(r0 + r, c0 + c);
        return out;
    }

    bool operator==(const Grid& o) const { return rows == o.rows && cols == o.cols && v == o.v; }
};

using FloatGrid = Grid<float>;
using MaskGrid = Grid<uint8_t>;

template <typename T>
bool all_finite(const Grid<T>& g) {
    for (const T x : g.v)
        if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
}

inline size_t mask_count(const MaskGrid& m) {
    size_t n = 0;
    for (const uint8_t x : m.v) n += (x != 0);
    return n;
}

inline void require_binary(const MaskGrid& m, const char* what) {
    for (const uint8_t x : m.v)
        if (x > 1) throw ContractError(std::string(what) + ": mask values must be 0 or 1");
}

// Gradient magnitude in height units per meter, central differences
// (one-sided at borders).
inline FloatGrid slope_magnitude(const FloatGrid& h, double resolution_m) {
    FloatGrid s(h.rows, h.cols);
    for (int r = 0; r < h.rows; ++r) {
        for (int c = 0; c < h.cols; ++c) {
            const int rm = r > 0 ? r - 1 : r, rp = r < h.rows - 1 ? r + 1 : r;
            const int cm = c > 0 ? c - 1 : c, cp = c < h.cols - 1 ? c + 1 : c;
            const double gy = (h.at(rp, c) - h.at(rm, c)) / ((rp - rm) * resolution_m);
            const double gx = (h.at(r, cp) - h.at(r, cm)) / ((cp - cm) * resolution_m);
            s.at(r, c) = static_cast<float>(std::sqrt(gx * gx + gy * gy));
        }
    }
    return s;
}

}  // namespace terra

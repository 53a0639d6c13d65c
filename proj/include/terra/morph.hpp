#pragma once

#include <utility>
#include <vector>

#include "terra/grid.hpp"

namespace terra {

// Offsets of the Euclidean disk {(dr,dc) : dr^2 + dc^2 <= d^2}.
std::vector<std::pair<int, int>> disk_offsets(int d);

// Binary erosion/dilation by a Euclidean disk of radius d.
// Pixels outside the image count as background.
MaskGrid erode(const MaskGrid& m, int d);
MaskGrid dilate(const MaskGrid& m, int d);

// Inner boundary band of thickness d: mask minus its erosion.
MaskGrid boundary_band(const MaskGrid& m, int d);

// 8-connected component labelling. Labels are 1..count in scan order, 0 = background.
struct Components {
    Grid<int> labels;
    int count = 0;
};
Components connected_components(const MaskGrid& m);

MaskGrid shift_mask(const MaskGrid& m, int dr, int dc);

}  // namespace terra

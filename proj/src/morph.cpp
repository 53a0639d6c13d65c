#include "terra/morph.hpp"

#include <deque>

namespace terra {

std::vector<std::pair<int, int>> disk_offsets(int d) {
    std::vector<std::pair<int, int>> off;
    for (int dr = -d; dr <= d; ++dr)
        for (int dc = -d; dc <= d; ++dc)
            if (dr * dr + dc * dc <= d * d) off.emplace_back(dr, dc);
    return off;
}

MaskGrid erode(const MaskGrid& m, int d) {
    const auto off = disk_offsets(d);
    MaskGrid out(m.rows, m.cols, 0);
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            if (!m.at(r, c)) continue;
            bool keep = true;
            for (const auto& [dr, dc] : off) {
                const int rr = r + dr, cc = c + dc;
                if (!m.in_bounds(rr, cc) || !m.at(rr, cc)) {
                    keep = false;
                    break;
                }
            }
            out.at(r, c) = keep ? 1 : 0;
        }
    }
    return out;
}

MaskGrid dilate(const MaskGrid& m, int d) {
    const auto off = disk_offsets(d);
    MaskGrid out(m.rows, m.cols, 0);
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            if (!m.at(r, c)) continue;
            for (const auto& [dr, dc] : off) {
                const int rr = r + dr, cc = c + dc;
                if (m.in_bounds(rr, cc)) out.at(rr, cc) = 1;
            }
        }
    }
    return out;
}

MaskGrid boundary_band(const MaskGrid& m, int d) {
    const MaskGrid er = erode(m, d);
    MaskGrid out(m.rows, m.cols, 0);
    for (size_t i = 0; i < m.v.size(); ++i) out.v[i] = (m.v[i] && !er.v[i]) ? 1 : 0;
    return out;
}

Components connected_components(const MaskGrid& m) {
    Components comp;
    comp.labels = Grid<int>(m.rows, m.cols, 0);
    std::deque<std::pair<int, int>> queue;
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            if (!m.at(r, c) || comp.labels.at(r, c)) continue;
            const int label = ++comp.count;
            comp.labels.at(r, c) = label;
            queue.push_back({r, c});
            while (!queue.empty()) {
                const auto [cr, cc] = queue.front();
                queue.pop_front();
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int rr = cr + dr, c2 = cc + dc;
                        if (!m.in_bounds(rr, c2) || !m.at(rr, c2) || comp.labels.at(rr, c2))
                            continue;
                        comp.labels.at(rr, c2) = label;
                        queue.push_back({rr, c2});
                    }
                }
            }
        }
    }
    return comp;
}

MaskGrid shift_mask(const MaskGrid& m, int dr, int dc) {
    MaskGrid out(m.rows, m.cols, 0);
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            const int sr = r - dr, sc = c - dc;
            if (m.in_bounds(sr, sc)) out.at(r, c) = m.at(sr, sc);
        }
    }
    return out;
}

}  // namespace terra

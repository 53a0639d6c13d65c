#pragma once

#include <Eigen/Core>

namespace terra::nn {

// C(MxN) += or = op(A) * op(B), row-major buffers. Thin wrapper so the layer
// code stays readable; Eigen runs single-threaded and deterministic.
template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const T* a, const T* b, T* c,
          bool accumulate) {
    using M = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using CMap = Eigen::Map<M>;
    using Map = Eigen::Map<const M>;
    CMap cm(c, m, n);
    const Map am(a, trans_a ? k : m, trans_a ? m : k);
    const Map bm(b, trans_b ? n : k, trans_b ? k : n);
    auto assign = [&](const auto& prod) {
        if (accumulate)
            cm.noalias() += prod;
        else
            cm.noalias() = prod;
    };
    if (!trans_a && !trans_b)
        assign(am * bm);
    else if (trans_a && !trans_b)
        assign(am.transpose() * bm);
    else if (!trans_a && trans_b)
        assign(am * bm.transpose());
    else
        assign(am.transpose() * bm.transpose());
}

}  // namespace terra::nn

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "terra/errors.hpp"
#include "terra/grid.hpp"

namespace terra::nn {

// Dense row-major tensor, rank <= 4. Activations are NCHW; parameters use
// whatever rank fits (conv kernels 4-D, biases 1-D, FC weights 2-D).
template <typename T>
struct Tensor {
    std::array<int, 4> dims{1, 1, 1, 1};
    int rank = 0;
    std::vector<T> v;

    Tensor() = default;
    explicit Tensor(std::initializer_list<int> shape) { resize(shape); }

    void resize(std::initializer_list<int> shape) {
        rank = static_cast<int>(shape.size());
        if (rank < 1 || rank > 4) throw ContractError("tensor rank must be 1..4");
        dims = {1, 1, 1, 1};
        int i = 0;
        size_t n = 1;
        for (const int d : shape) {
            if (d <= 0) throw ContractError("tensor dims must be positive");
            dims[i++] = d;
            n *= static_cast<size_t>(d);
        }
        v.assign(n, T{});
    }

    size_t numel() const { return v.size(); }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
    void zero() { std::fill(v.begin(), v.end(), T{}); }

    // NCHW accessors (rank-4 activations).
    int n() const { return dims[0]; }
    int c() const { return dims[1]; }
    int h() const { return dims[2]; }
    int w() const { return dims[3]; }
    T& at(int in, int ic, int ih, int iw) {
        return v[((static_cast<size_t>(in) * dims[1] + ic) * dims[2] + ih) * dims[3] + iw];
    }
    const T& at(int in, int ic, int ih, int iw) const {
        return v[((static_cast<size_t>(in) * dims[1] + ic) * dims[2] + ih) * dims[3] + iw];
    }

    bool same_shape(const Tensor& o) const { return rank == o.rank && dims == o.dims; }

    std::string shape_str() const {
        std::string s = "(";
        for (int i = 0; i < rank; ++i) s += (i ? "," : "") + std::to_string(dims[i]);
        return s + ")";
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.dims = dims;
        out.rank = rank;
        out.v.resize(v.size());
        for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }
};

template <typename T>
Tensor<T> from_grid(const Grid<float>& g) {
    Tensor<T> t({1, 1, g.rows, g.cols});
    for (size_t i = 0; i < g.v.size(); ++i) t.v[i] = static_cast<T>(g.v[i]);
    return t;
}

template <typename T>
bool tensor_finite(const Tensor<T>& t) {
    for (const T x : t.v)
        if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
}

}  // namespace terra::nn

#pragma once

#include <string>
#include <vector>

#include "terra/nn/gemm.hpp"
#include "terra/nn/tensor.hpp"

namespace terra::nn {

template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* value = nullptr;
    Tensor<T>* grad = nullptr;  // null for buffers (running stats)
    bool is_buffer = false;
};

template <typename T>
void im2col(const Tensor<T>& x, int item, int ksize, int stride, int pad, int out_h, int out_w,
            T* col) {
    const int ci = x.c(), ih = x.h(), iw = x.w();
    size_t idx = 0;
    for (int c = 0; c < ci; ++c) {
        for (int kr = 0; kr < ksize; ++kr) {
            for (int kc = 0; kc < ksize; ++kc) {
                for (int oh = 0; oh < out_h; ++oh) {
                    const int ir = oh * stride + kr - pad;
                    if (ir < 0 || ir >= ih) {
                        for (int ow = 0; ow < out_w; ++ow) col[idx++] = T{};
                        continue;
                    }
                    const T* row = &x.at(item, c, ir, 0);
                    for (int ow = 0; ow < out_w; ++ow) {
                        const int ic = ow * stride + kc - pad;
                        col[idx++] = (ic >= 0 && ic < iw) ? row[ic] : T{};
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im(const T* col, int ci, int ih, int iw, int ksize, int stride, int pad, int out_h,
            int out_w, Tensor<T>& dx, int item) {
    size_t idx = 0;
    for (int c = 0; c < ci; ++c) {
        for (int kr = 0; kr < ksize; ++kr) {
            for (int kc = 0; kc < ksize; ++kc) {
                for (int oh = 0; oh < out_h; ++oh) {
                    const int ir = oh * stride + kr - pad;
                    if (ir < 0 || ir >= ih) {
                        idx += out_w;
                        continue;
                    }
                    T* row = &dx.at(item, c, ir, 0);
                    for (int ow = 0; ow < out_w; ++ow) {
                        const int ic = ow * stride + kc - pad;
                        if (ic >= 0 && ic < iw) row[ic] += col[idx];
                        ++idx;
                    }
                }
            }
        }
    }
}

// 2-D convolution, square kernel, "same"-style padding (k/2).
template <typename T>
class Conv2d {
  public:
    Conv2d() = default;
    Conv2d(int in_ch, int out_ch, int ksize, int stride = 1, bool bias = false)
        : in_ch_(in_ch), out_ch_(out_ch), k_(ksize), stride_(stride), has_bias_(bias) {
        w.resize({out_ch, in_ch, ksize, ksize});
        dw.resize({out_ch, in_ch, ksize, ksize});
        if (bias) {
            b.resize({out_ch});
            db.resize({out_ch});
        }
    }

    Tensor<T> forward(const Tensor<T>& x) {
        x_ = x;
        const int pad = k_ / 2;
        const int oh = (x.h() + 2 * pad - k_) / stride_ + 1;
        const int ow = (x.w() + 2 * pad - k_) / stride_ + 1;
        Tensor<T> y({x.n(), out_ch_, oh, ow});
        const int kk = in_ch_ * k_ * k_;
        col_.resize(static_cast<size_t>(kk) * oh * ow);
        for (int i = 0; i < x.n(); ++i) {
            im2col(x, i, k_, stride_, pad, oh, ow, col_.data());
            gemm<T>(false, false, out_ch_, oh * ow, kk, w.data(), col_.data(),
                    &y.at(i, 0, 0, 0), false);
            if (has_bias_)
                for (int c = 0; c < out_ch_; ++c) {
                    T* p = &y.at(i, c, 0, 0);
                    for (int j = 0; j < oh * ow; ++j) p[j] += b.v[static_cast<size_t>(c)];
                }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const int pad = k_ / 2;
        const int oh = dy.h(), ow = dy.w();
        const int kk = in_ch_ * k_ * k_;
        Tensor<T> dx;
        dx.resize({x_.n(), in_ch_, x_.h(), x_.w()});
        std::vector<T> dcol(static_cast<size_t>(kk) * oh * ow);
        for (int i = 0; i < x_.n(); ++i) {
            im2col(x_, i, k_, stride_, pad, oh, ow, col_.data());
            // dW += dy_i * col^T ; dcol = W^T * dy_i
            gemm<T>(false, true, out_ch_, kk, oh * ow, &dy.at(i, 0, 0, 0), col_.data(), dw.data(),
                    true);
            gemm<T>(true, false, kk, oh * ow, out_ch_, w.data(), &dy.at(i, 0, 0, 0), dcol.data(),
                    false);
            col2im(dcol.data(), in_ch_, x_.h(), x_.w(), k_, stride_, pad, oh, ow, dx, i);
            if (has_bias_)
                for (int c = 0; c < out_ch_; ++c) {
                    const T* p = &dy.at(i, c, 0, 0);
                    T s{};
                    for (int j = 0; j < oh * ow; ++j) s += p[j];
                    db.v[static_cast<size_t>(c)] += s;
                }
        }
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".w", &w, &dw, false});
        if (has_bias_) out.push_back({prefix + ".b", &b, &db, false});
    }

    int fan_in() const { return in_ch_ * k_ * k_; }

    Tensor<T> w, b, dw, db;

  private:
    int in_ch_ = 0, out_ch_ = 0, k_ = 0, stride_ = 1;
    bool has_bias_ = false;
    Tensor<T> x_;
    std::vector<T> col_;
};

template <typename T>
class BatchNorm2d {
  public:
    BatchNorm2d() = default;
    explicit BatchNorm2d(int channels, T momentum = T(0.1), T eps = T(1e-5))
        : ch_(channels), momentum_(momentum), eps_(eps) {
        gamma.resize({channels});
        beta.resize({channels});
        dgamma.resize({channels});
        dbeta.resize({channels});
        running_mean.resize({channels});
        running_var.resize({channels});
        for (auto& g : gamma.v) g = T(1);
        for (auto& rv : running_var.v) rv = T(1);
    }

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        training_ = training;
        const int n = x.n(), hw = x.h() * x.w();
        const T m_count = static_cast<T>(n) * static_cast<T>(hw);
        Tensor<T> y = x;
        xhat_ = x;
        invstd_.assign(static_cast<size_t>(ch_), T{});
        for (int c = 0; c < ch_; ++c) {
            T mean, var;
            if (training) {
                T sum{};
                for (int i = 0; i < n; ++i) {
                    const T* p = &x.at(i, c, 0, 0);
                    for (int j = 0; j < hw; ++j) sum += p[j];
                }
                mean = sum / m_count;
                T sq{};
                for (int i = 0; i < n; ++i) {
                    const T* p = &x.at(i, c, 0, 0);
                    for (int j = 0; j < hw; ++j) sq += (p[j] - mean) * (p[j] - mean);
                }
                var = sq / m_count;
                running_mean.v[c] = (T(1) - momentum_) * running_mean.v[c] + momentum_ * mean;
                running_var.v[c] = (T(1) - momentum_) * running_var.v[c] + momentum_ * var;
            } else {
                mean = running_mean.v[c];
                var = running_var.v[c];
            }
            const T inv = T(1) / std::sqrt(var + eps_);
            invstd_[c] = inv;
            const T g = gamma.v[c], bb = beta.v[c];
            for (int i = 0; i < n; ++i) {
                const T* px = &x.at(i, c, 0, 0);
                T* ph = &xhat_.at(i, c, 0, 0);
                T* py = &y.at(i, c, 0, 0);
                for (int j = 0; j < hw; ++j) {
                    const T xh = (px[j] - mean) * inv;
                    ph[j] = xh;
                    py[j] = g * xh + bb;
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const int n = dy.n(), hw = dy.h() * dy.w();
        const T m_count = static_cast<T>(n) * static_cast<T>(hw);
        Tensor<T> dx = dy;
        for (int c = 0; c < ch_; ++c) {
            T sum_dy{}, sum_dy_xh{};
            for (int i = 0; i < n; ++i) {
                const T* pdy = &dy.at(i, c, 0, 0);
                const T* ph = &xhat_.at(i, c, 0, 0);
                for (int j = 0; j < hw; ++j) {
                    sum_dy += pdy[j];
                    sum_dy_xh += pdy[j] * ph[j];
                }
            }
            dgamma.v[c] += sum_dy_xh;
            dbeta.v[c] += sum_dy;
            const T g = gamma.v[c], inv = invstd_[c];
            for (int i = 0; i < n; ++i) {
                const T* pdy = &dy.at(i, c, 0, 0);
                const T* ph = &xhat_.at(i, c, 0, 0);
                T* pdx = &dx.at(i, c, 0, 0);
                for (int j = 0; j < hw; ++j) {
                    if (training_)
                        pdx[j] = g * inv / m_count *
                                 (m_count * pdy[j] - sum_dy - ph[j] * sum_dy_xh);
                    else
                        pdx[j] = g * inv * pdy[j];
                }
            }
        }
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".gamma", &gamma, &dgamma, false});
        out.push_back({prefix + ".beta", &beta, &dbeta, false});
        out.push_back({prefix + ".running_mean", &running_mean, nullptr, true});
        out.push_back({prefix + ".running_var", &running_var, nullptr, true});
    }

    Tensor<T> gamma, beta, dgamma, dbeta, running_mean, running_var;

  private:
    int ch_ = 0;
    T momentum_ = T(0.1), eps_ = T(1e-5);
    bool training_ = true;
    Tensor<T> xhat_;
    std::vector<T> invstd_;
};

template <typename T>
class ReLU {
  public:
    Tensor<T> forward(const Tensor<T>& x) {
        mask_.assign(x.numel(), 0);
        Tensor<T> y = x;
        for (size_t i = 0; i < y.v.size(); ++i) {
            if (y.v[i] > T{})
                mask_[i] = 1;
            else
                y.v[i] = T{};
        }
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx = dy;
        for (size_t i = 0; i < dx.v.size(); ++i)
            if (!mask_[i]) dx.v[i] = T{};
        return dx;
    }

  private:
    std::vector<uint8_t> mask_;
};

template <typename T>
class Upsample2xNearest {
  public:
    Tensor<T> forward(const Tensor<T>& x) {
        in_h_ = x.h();
        in_w_ = x.w();
        Tensor<T> y({x.n(), x.c(), x.h() * 2, x.w() * 2});
        for (int i = 0; i < x.n(); ++i)
            for (int c = 0; c < x.c(); ++c)
                for (int r = 0; r < y.h(); ++r) {
                    const T* src = &x.at(i, c, r / 2, 0);
                    T* dst = &y.at(i, c, r, 0);
                    for (int cc = 0; cc < y.w(); ++cc) dst[cc] = src[cc / 2];
                }
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx({dy.n(), dy.c(), in_h_, in_w_});
        for (int i = 0; i < dy.n(); ++i)
            for (int c = 0; c < dy.c(); ++c)
                for (int r = 0; r < dy.h(); ++r) {
                    const T* src = &dy.at(i, c, r, 0);
                    T* dst = &dx.at(i, c, r / 2, 0);
                    for (int cc = 0; cc < dy.w(); ++cc) dst[cc / 2] += src[cc];
                }
        return dx;
    }

  private:
    int in_h_ = 0, in_w_ = 0;
};

// 2x2 mean pooling (stride 2); used by the perceptual feature stack.
template <typename T>
class MeanPool2x {
  public:
    Tensor<T> forward(const Tensor<T>& x) {
        in_h_ = x.h();
        in_w_ = x.w();
        Tensor<T> y({x.n(), x.c(), x.h() / 2, x.w() / 2});
        for (int i = 0; i < x.n(); ++i)
            for (int c = 0; c < x.c(); ++c)
                for (int r = 0; r < y.h(); ++r)
                    for (int cc = 0; cc < y.w(); ++cc)
                        y.at(i, c, r, cc) =
                            (x.at(i, c, 2 * r, 2 * cc) + x.at(i, c, 2 * r, 2 * cc + 1) +
                             x.at(i, c, 2 * r + 1, 2 * cc) + x.at(i, c, 2 * r + 1, 2 * cc + 1)) /
                            T(4);
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx({dy.n(), dy.c(), in_h_, in_w_});
        for (int i = 0; i < dy.n(); ++i)
            for (int c = 0; c < dy.c(); ++c)
                for (int r = 0; r < dy.h(); ++r)
                    for (int cc = 0; cc < dy.w(); ++cc) {
                        const T g = dy.at(i, c, r, cc) / T(4);
                        dx.at(i, c, 2 * r, 2 * cc) += g;
                        dx.at(i, c, 2 * r, 2 * cc + 1) += g;
                        dx.at(i, c, 2 * r + 1, 2 * cc) += g;
                        dx.at(i, c, 2 * r + 1, 2 * cc + 1) += g;
                    }
        return dx;
    }

  private:
    int in_h_ = 0, in_w_ = 0;
};

// Squeeze-and-excitation: global-average squeeze, two-layer excitation with a
// rectifier between and a logistic squashing after, per-channel rescale.
template <typename T>
class SEBlock {
  public:
    SEBlock() = default;
    SEBlock(int channels, int reduction) : ch_(channels), red_(reduction) {
        if (reduction < 1 || channels % reduction != 0)
            throw ConfigError("se reduction must divide channel count (" +
                              std::to_string(channels) + " % " + std::to_string(reduction) + ")");
        const int mid = channels / reduction;
        fc1_w.resize({mid, channels});
        fc1_b.resize({mid});
        fc2_w.resize({channels, mid});
        fc2_b.resize({channels});
        dfc1_w.resize({mid, channels});
        dfc1_b.resize({mid});
        dfc2_w.resize({channels, mid});
        dfc2_b.resize({channels});
    }

    Tensor<T> forward(const Tensor<T>& x) {
        x_ = x;
        const int n = x.n(), hw = x.h() * x.w();
        const int mid = ch_ / red_;
        s_.resize({n, ch_, 1, 1});
        z_.resize({n, mid, 1, 1});
        gate_.resize({n, ch_, 1, 1});
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < ch_; ++c) {
                const T* p = &x.at(i, c, 0, 0);
                T sum{};
                for (int j = 0; j < hw; ++j) sum += p[j];
                s_.at(i, c, 0, 0) = sum / static_cast<T>(hw);
            }
            for (int mm = 0; mm < mid; ++mm) {
                T a = fc1_b.v[mm];
                for (int c = 0; c < ch_; ++c)
                    a += fc1_w.v[static_cast<size_t>(mm) * ch_ + c] * s_.at(i, c, 0, 0);
                z_.at(i, mm, 0, 0) = a > T{} ? a : T{};
            }
            for (int c = 0; c < ch_; ++c) {
                T a = fc2_b.v[c];
                for (int mm = 0; mm < mid; ++mm)
                    a += fc2_w.v[static_cast<size_t>(c) * mid + mm] * z_.at(i, mm, 0, 0);
                gate_.at(i, c, 0, 0) = T(1) / (T(1) + std::exp(-a));
            }
        }
        Tensor<T> y = x;
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < ch_; ++c) {
                const T g = gate_.at(i, c, 0, 0);
                T* p = &y.at(i, c, 0, 0);
                for (int j = 0; j < hw; ++j) p[j] *= g;
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const int n = dy.n(), hw = dy.h() * dy.w();
        const int mid = ch_ / red_;
        Tensor<T> dx = dy;
        for (int i = 0; i < n; ++i) {
            // Per-channel gate gradient and pass-through term.
            std::vector<T> dgate(static_cast<size_t>(ch_));
            for (int c = 0; c < ch_; ++c) {
                const T g = gate_.at(i, c, 0, 0);
                const T* pdy = &dy.at(i, c, 0, 0);
                const T* px = &x_.at(i, c, 0, 0);
                T* pdx = &dx.at(i, c, 0, 0);
                T acc{};
                for (int j = 0; j < hw; ++j) {
                    acc += pdy[j] * px[j];
                    pdx[j] = pdy[j] * g;
                }
                dgate[c] = acc * g * (T(1) - g);  // through the logistic
            }
            // Through fc2.
            std::vector<T> dz(static_cast<size_t>(mid), T{});
            for (int c = 0; c < ch_; ++c) {
                dfc2_b.v[c] += dgate[c];
                for (int mm = 0; mm < mid; ++mm) {
                    dfc2_w.v[static_cast<size_t>(c) * mid + mm] += dgate[c] * z_.at(i, mm, 0, 0);
                    dz[mm] += fc2_w.v[static_cast<size_t>(c) * mid + mm] * dgate[c];
                }
            }
            // Through the rectifier and fc1.
            std::vector<T> ds(static_cast<size_t>(ch_), T{});
            for (int mm = 0; mm < mid; ++mm) {
                if (z_.at(i, mm, 0, 0) <= T{}) continue;
                dfc1_b.v[mm] += dz[mm];
                for (int c = 0; c < ch_; ++c) {
                    dfc1_w.v[static_cast<size_t>(mm) * ch_ + c] += dz[mm] * s_.at(i, c, 0, 0);
                    ds[c] += fc1_w.v[static_cast<size_t>(mm) * ch_ + c] * dz[mm];
                }
            }
            // Squeeze was a spatial mean.
            for (int c = 0; c < ch_; ++c) {
                const T g = ds[c] / static_cast<T>(hw);
                T* pdx = &dx.at(i, c, 0, 0);
                for (int j = 0; j < hw; ++j) pdx[j] += g;
            }
        }
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".fc1.w", &fc1_w, &dfc1_w, false});
        out.push_back({prefix + ".fc1.b", &fc1_b, &dfc1_b, false});
        out.push_back({prefix + ".fc2.w", &fc2_w, &dfc2_w, false});
        out.push_back({prefix + ".fc2.b", &fc2_b, &dfc2_b, false});
    }

    const Tensor<T>& last_gates() const { return gate_; }

    Tensor<T> fc1_w, fc1_b, fc2_w, fc2_b;
    Tensor<T> dfc1_w, dfc1_b, dfc2_w, dfc2_b;

  private:
    int ch_ = 0, red_ = 1;
    Tensor<T> x_, s_, z_, gate_;
};

}  // namespace terra::nn

#pragma once

#include <array>
#include <cmath>

#include "terra/grid.hpp"
#include "terra/nn/layers.hpp"
#include "terra/rng.hpp"

namespace terra::nn {

// Smooth-L1 with the quadratic/linear crossover at |r| = beta, mean-reduced
// over pixels. Optional gradient w.r.t. the prediction.
template <typename T>
T smooth_l1(const Tensor<T>& target, const Tensor<T>& pred, T beta = T(1),
            Tensor<T>* dpred = nullptr) {
    if (!target.same_shape(pred)) throw ContractError("smooth_l1: shape mismatch");
    if (!(beta > T{})) throw ContractError("smooth_l1: beta must be > 0");
    if (dpred) {
        dpred->dims = pred.dims;
        dpred->rank = pred.rank;
        dpred->v.assign(pred.numel(), T{});
    }
    const T inv_n = T(1) / static_cast<T>(pred.numel());
    T loss{};
    for (size_t i = 0; i < pred.v.size(); ++i) {
        const T r = pred.v[i] - target.v[i];
        const T a = std::abs(r);
        if (a < beta) {
            loss += T(0.5) * r * r / beta;
            if (dpred) dpred->v[i] = r / beta * inv_n;
        } else {
            loss += a - T(0.5) * beta;
            if (dpred) dpred->v[i] = (r > T{} ? T(1) : T(-1)) * inv_n;
        }
    }
    return loss * inv_n;
}

struct LossWeights {
    double lambda_perceptual = 1.0;
    double class_weight_background = 1.0;
    double class_weight_building = 1.0;
    double dice_eps = 1e-6;

    void validate() const {
        if (lambda_perceptual < 0) throw ConfigError("lambda_perceptual must be >= 0");
        if (class_weight_background <= 0 || class_weight_building <= 0)
            throw ConfigError("class weights must be > 0");
        if (dice_eps < 0) throw ConfigError("dice_eps must be >= 0");
    }
};

// Softmax cross-entropy with per-class weights, mean over pixels, computed in
// the log domain. logits are (K,H,W) as a rank-3 tensor or (1,K,H,W).
template <typename T>
T weighted_cross_entropy(const Tensor<T>& logits, const MaskGrid& target,
                         const std::vector<T>& class_weights, Tensor<T>* dlogits = nullptr) {
    const int k = logits.rank == 4 ? logits.c() : logits.dims[0];
    const int h = logits.rank == 4 ? logits.h() : logits.dims[1];
    const int w = logits.rank == 4 ? logits.w() : logits.dims[2];
    if ((logits.rank == 4 && logits.n() != 1) || (logits.rank != 3 && logits.rank != 4))
        throw ContractError("weighted_cross_entropy expects (K,H,W) logits");
    if (h != target.rows || w != target.cols)
        throw ContractError("weighted_cross_entropy: target shape mismatch");
    if (static_cast<int>(class_weights.size()) != k)
        throw ContractError("weighted_cross_entropy: need one weight per class");
    if (dlogits) {
        dlogits->dims = logits.dims;
        dlogits->rank = logits.rank;
        dlogits->v.assign(logits.numel(), T{});
    }
    const size_t plane = static_cast<size_t>(h) * w;
    const T inv_n = T(1) / static_cast<T>(plane);
    T loss{};
    for (size_t p = 0; p < plane; ++p) {
        const int t = target.v[p];
        if (t < 0 || t >= k) throw ContractError("class index out of range");
        T zmax = logits.v[p];
        for (int c = 1; c < k; ++c) zmax = std::max(zmax, logits.v[c * plane + p]);
        T sum{};
        for (int c = 0; c < k; ++c) sum += std::exp(logits.v[c * plane + p] - zmax);
        const T logz = zmax + std::log(sum);
        const T wt = class_weights[static_cast<size_t>(t)];
        loss += wt * (logz - logits.v[static_cast<size_t>(t) * plane + p]);
        if (dlogits) {
            for (int c = 0; c < k; ++c) {
                const T soft = std::exp(logits.v[c * plane + p] - logz);
                dlogits->v[c * plane + p] = wt * (soft - (c == t ? T(1) : T{})) * inv_n;
            }
        }
    }
    return loss * inv_n;
}

// Soft DICE loss on foreground probabilities: 1 - (2Σpq + eps)/(Σp + Σq + eps).
template <typename T>
T dice_loss(const Tensor<T>& prob, const MaskGrid& target, T eps = T(1e-6),
            Tensor<T>* dprob = nullptr) {
    if (prob.numel() != target.size()) throw ContractError("dice_loss: shape mismatch");
    T sum_p{}, sum_q{}, sum_pq{};
    for (size_t i = 0; i < prob.v.size(); ++i) {
        const T q = static_cast<T>(target.v[i]);
        sum_p += prob.v[i];
        sum_q += q;
        sum_pq += prob.v[i] * q;
    }
    const T num = T(2) * sum_pq + eps;
    const T den = sum_p + sum_q + eps;
    if (dprob) {
        dprob->dims = prob.dims;
        dprob->rank = prob.rank;
        dprob->v.assign(prob.numel(), T{});
        for (size_t i = 0; i < prob.v.size(); ++i) {
            const T q = static_cast<T>(target.v[i]);
            dprob->v[i] = -(T(2) * q * den - num) / (den * den);
        }
    }
    return T(1) - num / den;
}

// Fixed random convolutional feature stack standing in for a pretrained
// perceptual network: 4 stages of {conv3x3, rectifier, 2x mean downsample},
// widths 8/16/32/64, weights drawn once from the portable RNG and frozen.
// Distances sum per-stage MSEs between channel-unit-normalized activations
// with unit stage weights.
template <typename T>
class PerceptualExtractor {
  public:
    static constexpr int kStages = 4;
    static constexpr uint64_t kDefaultSeed = 1234;

    explicit PerceptualExtractor(uint64_t seed = kDefaultSeed) {
        const int widths[kStages] = {8, 16, 32, 64};
        Rng rng(Rng::substream(seed, "perceptual-extractor"));
        int in_ch = 1;
        for (int s = 0; s < kStages; ++s) {
            w_[s].resize({widths[s], in_ch, 3, 3});
            const double std = std::sqrt(2.0 / (in_ch * 9));
            for (auto& x : w_[s].v) x = static_cast<T>(rng.normal() * std);
            in_ch = widths[s];
        }
    }

    const Tensor<T>& stage_weights(int s) const { return w_[s]; }

    // Pseudometric between single-channel tiles; optional gradient w.r.t. x.
    T distance(const Tensor<T>& x, const Tensor<T>& y, Tensor<T>* dx = nullptr) const {
        if (!x.same_shape(y)) throw ContractError("perceptual_distance: shape mismatch");
        if (x.rank != 4 || x.c() != 1)
            throw ContractError("perceptual_distance expects (N,1,H,W) tiles");
        if (x.h() % (1 << kStages) != 0 || x.w() % (1 << kStages) != 0)
            throw ContractError("perceptual_distance: spatial dims must be divisible by 16");
        StageCache cx, cy;
        run(x, cx);
        run(y, cy);
        T total{};
        std::array<Tensor<T>, kStages> dnorm;
        for (int s = 0; s < kStages; ++s) {
            const auto& nx = cx.normed[s];
            const auto& ny = cy.normed[s];
            const T inv_n = T(1) / static_cast<T>(nx.numel());
            T mse{};
            for (size_t i = 0; i < nx.v.size(); ++i) {
                const T d = nx.v[i] - ny.v[i];
                mse += d * d;
            }
            total += mse * inv_n;
            if (dx) {
                dnorm[s] = nx;
                for (size_t i = 0; i < nx.v.size(); ++i)
                    dnorm[s].v[i] = T(2) * (nx.v[i] - ny.v[i]) * inv_n;
            }
        }
        if (!std::isfinite(static_cast<double>(total)))
            throw NumericError("perceptual_distance produced a non-finite value");
        if (dx) *dx = backward(cx, dnorm);
        return total;
    }

  private:
    struct StageCache {
        std::array<Tensor<T>, kStages> relu_out;  // post-rectifier activations
        std::array<Tensor<T>, kStages> normed;    // channel-unit-normalized
        std::array<std::vector<T>, kStages> denom;
        std::array<std::array<int, 2>, kStages> in_shape;  // conv input H, W
    };

    Tensor<T> conv3(const Tensor<T>& w, const Tensor<T>& x) const {
        const int co = w.dims[0], ci = w.dims[1];
        const int oh = x.h(), ow = x.w();  // stride 1, pad 1
        Tensor<T> y({x.n(), co, oh, ow});
        const int kk = ci * 9;
        std::vector<T> col(static_cast<size_t>(kk) * oh * ow);
        for (int i = 0; i < x.n(); ++i) {
            im2col(x, i, 3, 1, 1, oh, ow, col.data());
            gemm<T>(false, false, co, oh * ow, kk, w.data(), col.data(), &y.at(i, 0, 0, 0),
                    false);
        }
        return y;
    }

    Tensor<T> conv3_backward_input(const Tensor<T>& w, const Tensor<T>& dy, int in_h,
                                   int in_w) const {
        const int co = w.dims[0], ci = w.dims[1];
        const int kk = ci * 9;
        Tensor<T> dx({dy.n(), ci, in_h, in_w});
        std::vector<T> dcol(static_cast<size_t>(kk) * dy.h() * dy.w());
        for (int i = 0; i < dy.n(); ++i) {
            gemm<T>(true, false, kk, dy.h() * dy.w(), co, w.data(), &dy.at(i, 0, 0, 0),
                    dcol.data(), false);
            col2im(dcol.data(), ci, in_h, in_w, 3, 1, 1, dy.h(), dy.w(), dx, i);
        }
        return dx;
    }

    static void channel_normalize(const Tensor<T>& a, Tensor<T>& out, std::vector<T>& denom) {
        const int n = a.n(), c = a.c(), hw = a.h() * a.w();
        out = a;
        denom.assign(static_cast<size_t>(n) * hw, T{});
        for (int i = 0; i < n; ++i) {
            for (int p = 0; p < hw; ++p) {
                T q{};
                for (int cc = 0; cc < c; ++cc) {
                    const T v = a.v[(static_cast<size_t>(i) * c + cc) * hw + p];
                    q += v * v;
                }
                const T d = std::sqrt(q + T(1e-10));
                denom[static_cast<size_t>(i) * hw + p] = d;
                for (int cc = 0; cc < c; ++cc)
                    out.v[(static_cast<size_t>(i) * c + cc) * hw + p] /= d;
            }
        }
    }

    void run(const Tensor<T>& x, StageCache& cache) const {
        Tensor<T> cur = x;
        for (int s = 0; s < kStages; ++s) {
            cache.in_shape[s] = {cur.h(), cur.w()};
            Tensor<T> a = conv3(w_[s], cur);
            for (auto& v : a.v)
                if (v < T{}) v = T{};
            cache.relu_out[s] = a;
            channel_normalize(a, cache.normed[s], cache.denom[s]);
            MeanPool2x<T> pool;
            cur = pool.forward(a);
        }
    }

    Tensor<T> backward(const StageCache& cache, std::array<Tensor<T>, kStages>& dnorm) const {
        Tensor<T> dcur;  // gradient w.r.t. the pooled output of the current stage
        for (int s = kStages - 1; s >= 0; --s) {
            const auto& a = cache.relu_out[s];
            const int n = a.n(), c = a.c(), hw = a.h() * a.w();
            // Through the normalization: y = a/d, d = sqrt(Σ_c a^2 + eps).
            Tensor<T> da = a;
            da.zero();
            for (int i = 0; i < n; ++i) {
                for (int p = 0; p < hw; ++p) {
                    const T d = cache.denom[s][static_cast<size_t>(i) * hw + p];
                    T dot{};
                    for (int cc = 0; cc < c; ++cc) {
                        const size_t idx = (static_cast<size_t>(i) * c + cc) * hw + p;
                        dot += dnorm[s].v[idx] * a.v[idx];
                    }
                    for (int cc = 0; cc < c; ++cc) {
                        const size_t idx = (static_cast<size_t>(i) * c + cc) * hw + p;
                        da.v[idx] = dnorm[s].v[idx] / d - a.v[idx] * dot / (d * d * d);
                    }
                }
            }
            if (s < kStages - 1) {
                // The pooled activations fed the next stage; fold that path in.
                MeanPool2x<T> pool;
                pool.forward(a);  // set shapes
                const Tensor<T> dpool = pool.backward(dcur);
                for (size_t i = 0; i < da.v.size(); ++i) da.v[i] += dpool.v[i];
            }
            for (size_t i = 0; i < da.v.size(); ++i)
                if (!(cache.relu_out[s].v[i] > T{})) da.v[i] = T{};
            dcur = conv3_backward_input(w_[s], da, cache.in_shape[s][0], cache.in_shape[s][1]);
        }
        return dcur;
    }

    std::array<Tensor<T>, kStages> w_;
};

template <typename T>
T perceptual_distance(const Tensor<T>& x, const Tensor<T>& y, const PerceptualExtractor<T>& f,
                      Tensor<T>* dx = nullptr) {
    return f.distance(x, y, dx);
}

// Pretext objective: smooth-L1 plus weighted perceptual distance.
template <typename T>
T reconstruction_loss(const Tensor<T>& target, const Tensor<T>& pred,
                      const PerceptualExtractor<T>& f, const LossWeights& weights,
                      Tensor<T>* dpred = nullptr, T beta = T(1)) {
    Tensor<T> d1, d2;
    const T l1 = smooth_l1(target, pred, beta, dpred ? &d1 : nullptr);
    const auto lambda = static_cast<T>(weights.lambda_perceptual);
    T lp{};
    if (lambda > T{}) {
        lp = f.distance(pred, target, dpred ? &d2 : nullptr);
    }
    if (dpred) {
        *dpred = d1;
        if (lambda > T{})
            for (size_t i = 0; i < dpred->v.size(); ++i) dpred->v[i] += lambda * d2.v[i];
    }
    return l1 + lambda * lp;
}

// Downstream objective: weighted cross-entropy plus DICE on the building
// channel, both differentiated back to the logits.
template <typename T>
T segmentation_loss(const Tensor<T>& logits, const MaskGrid& target, const LossWeights& weights,
                    Tensor<T>* dlogits = nullptr) {
    weights.validate();
    const std::vector<T> cw = {static_cast<T>(weights.class_weight_background),
                               static_cast<T>(weights.class_weight_building)};
    Tensor<T> dce;
    const T ce = weighted_cross_entropy(logits, target, cw, dlogits ? &dce : nullptr);

    // Softmax probabilities for the building class (index 1).
    const int k = logits.rank == 4 ? logits.c() : logits.dims[0];
    const size_t plane = logits.numel() / static_cast<size_t>(k);
    Tensor<T> prob({static_cast<int>(target.rows), static_cast<int>(target.cols)});
    std::vector<T> p_all(logits.numel());
    for (size_t p = 0; p < plane; ++p) {
        T zmax = logits.v[p];
        for (int c = 1; c < k; ++c) zmax = std::max(zmax, logits.v[c * plane + p]);
        T sum{};
        for (int c = 0; c < k; ++c) sum += std::exp(logits.v[c * plane + p] - zmax);
        for (int c = 0; c < k; ++c) p_all[c * plane + p] = std::exp(logits.v[c * plane + p] - zmax) / sum;
        prob.v[p] = p_all[plane + p];
    }
    Tensor<T> dprob;
    const T dl = dice_loss(prob, target, static_cast<T>(weights.dice_eps),
                           dlogits ? &dprob : nullptr);
    if (dlogits) {
        *dlogits = dce;
        // Chain DICE through the softmax: dz_c = p_c (δ_{c1} - p_1) * dL/dp_1.
        for (size_t p = 0; p < plane; ++p) {
            const T g = dprob.v[p];
            const T p1 = p_all[plane + p];
            for (int c = 0; c < k; ++c) {
                const T pc = p_all[c * plane + p];
                dlogits->v[c * plane + p] += pc * ((c == 1 ? T(1) : T{}) - p1) * g;
            }
        }
    }
    return ce + dl;
}

}  // namespace terra::nn

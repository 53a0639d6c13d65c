#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "terra/nn/layers.hpp"

namespace terra::nn {

// Global gradient-norm clipping. Returns the pre-clip norm.
template <typename T>
double clip_global_norm(std::vector<ParamRef<T>>& params, double max_norm) {
    double sq = 0.0;
    for (auto& p : params) {
        if (!p.grad) continue;
        for (const T g : p.grad->v) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const T scale = static_cast<T>(max_norm / norm);
        for (auto& p : params) {
            if (!p.grad) continue;
            for (auto& g : p.grad->v) g *= scale;
        }
    }
    return norm;
}

// Named optimizer state tensors, for resumable checkpoints.
template <typename T>
struct OptimSlot {
    std::string name;
    Tensor<T>* tensor;
};

template <typename T>
class Adam {
  public:
    Adam(std::vector<ParamRef<T>>& params, double lr, double weight_decay = 0.0,
         double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : params_(params), lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            if (!params[i].grad) continue;
            m_[i].dims = params[i].value->dims;
            m_[i].rank = params[i].value->rank;
            m_[i].v.assign(params[i].value->numel(), T{});
            v_[i] = m_[i];
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(b1_, t_);
        const double bc2 = 1.0 - std::pow(b2_, t_);
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i];
            if (!p.grad) continue;
            for (size_t j = 0; j < p.value->v.size(); ++j) {
                double g = static_cast<double>(p.grad->v[j]) +
                           wd_ * static_cast<double>(p.value->v[j]);
                double m = b1_ * static_cast<double>(m_[i].v[j]) + (1.0 - b1_) * g;
                double v = b2_ * static_cast<double>(v_[i].v[j]) + (1.0 - b2_) * g * g;
                m_[i].v[j] = static_cast<T>(m);
                v_[i].v[j] = static_cast<T>(v);
                const double mh = m / bc1, vh = v / bc2;
                p.value->v[j] -= static_cast<T>(lr_ * mh / (std::sqrt(vh) + eps_));
            }
        }
    }

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    long step_count() const { return t_; }
    void set_step_count(long t) { t_ = t; }

    std::vector<OptimSlot<T>> state() {
        std::vector<OptimSlot<T>> out;
        for (size_t i = 0; i < params_.size(); ++i) {
            if (!params_[i].grad) continue;
            out.push_back({"opt.m." + params_[i].name, &m_[i]});
            out.push_back({"opt.v." + params_[i].name, &v_[i]});
        }
        return out;
    }

  private:
    std::vector<ParamRef<T>>& params_;
    double lr_, wd_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

// RMS-style optimizer. "smoothing" mode reads the paper recipe's 0.999 as the
// squared-gradient smoothing constant; "heavy_ball" reads it as classical
// momentum on the preconditioned step.
enum class RmsMomentumMode : uint8_t { smoothing = 0, heavy_ball = 1 };

template <typename T>
class RmsProp {
  public:
    RmsProp(std::vector<ParamRef<T>>& params, double lr, double momentum = 0.999,
            double weight_decay = 0.0, RmsMomentumMode mode = RmsMomentumMode::smoothing,
            double eps = 1e-8)
        : params_(params), lr_(lr), wd_(weight_decay), eps_(eps), mode_(mode) {
        if (mode == RmsMomentumMode::smoothing) {
            alpha_ = momentum;
            mu_ = 0.0;
        } else {
            alpha_ = 0.99;
            mu_ = momentum;
        }
        sq_.resize(params.size());
        buf_.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            if (!params[i].grad) continue;
            sq_[i].dims = params[i].value->dims;
            sq_[i].rank = params[i].value->rank;
            sq_[i].v.assign(params[i].value->numel(), T{});
            buf_[i] = sq_[i];
        }
    }

    void step() {
        ++t_;
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i];
            if (!p.grad) continue;
            for (size_t j = 0; j < p.value->v.size(); ++j) {
                const double g = static_cast<double>(p.grad->v[j]) +
                                 wd_ * static_cast<double>(p.value->v[j]);
                const double sq =
                    alpha_ * static_cast<double>(sq_[i].v[j]) + (1.0 - alpha_) * g * g;
                sq_[i].v[j] = static_cast<T>(sq);
                const double precond = g / (std::sqrt(sq) + eps_);
                if (mode_ == RmsMomentumMode::smoothing) {
                    p.value->v[j] -= static_cast<T>(lr_ * precond);
                } else {
                    const double b = mu_ * static_cast<double>(buf_[i].v[j]) + precond;
                    buf_[i].v[j] = static_cast<T>(b);
                    p.value->v[j] -= static_cast<T>(lr_ * b);
                }
            }
        }
    }

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    long step_count() const { return t_; }
    void set_step_count(long t) { t_ = t; }

    std::vector<OptimSlot<T>> state() {
        std::vector<OptimSlot<T>> out;
        for (size_t i = 0; i < params_.size(); ++i) {
            if (!params_[i].grad) continue;
            out.push_back({"opt.sq." + params_[i].name, &sq_[i]});
            if (mode_ == RmsMomentumMode::heavy_ball)
                out.push_back({"opt.buf." + params_[i].name, &buf_[i]});
        }
        return out;
    }

  private:
    std::vector<ParamRef<T>>& params_;
    double lr_, wd_, eps_, alpha_ = 0.999, mu_ = 0.0;
    RmsMomentumMode mode_;
    long t_ = 0;
    std::vector<Tensor<T>> sq_, buf_;
};

// Reduce-on-plateau: multiply the lr by `factor` once the monitored loss has
// not improved by more than min_delta for `patience` consecutive epochs.
class PlateauScheduler {
  public:
    PlateauScheduler(double initial_lr, int patience, double factor = 0.1,
                     double min_delta = 1e-5)
        : lr_(initial_lr), patience_(patience), factor_(factor), min_delta_(min_delta) {}

    // Returns true when the lr was decayed this epoch.
    bool observe(double loss) {
        if (loss < best_ - min_delta_) {
            best_ = loss;
            stagnant_ = 0;
            return false;
        }
        if (++stagnant_ >= patience_) {
            lr_ *= factor_;
            stagnant_ = 0;
            return true;
        }
        return false;
    }

    double lr() const { return lr_; }
    double best() const { return best_; }
    int stagnant() const { return stagnant_; }
    void restore(double lr, double best, int stagnant) {
        lr_ = lr;
        best_ = best;
        stagnant_ = stagnant;
    }

  private:
    double lr_;
    int patience_;
    double factor_;
    double min_delta_;
    double best_ = 1e300;
    int stagnant_ = 0;
};

}  // namespace terra::nn

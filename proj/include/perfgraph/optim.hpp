#pragma once

#include <cmath>
#include <vector>

#include "perfgraph/surrogate.hpp"

namespace perfgraph {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

/// Adaptive moments with bias correction and decoupled weight decay.
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

    void step(ParamStore& params) {
        auto& items = params.items();
        if (m_.empty()) {
            for (const auto& p : items) {
                m_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
                v_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
            }
        }
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < items.size(); ++i) {
            Mat& w = items[i].value;
            const Mat& g = items[i].grad;
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
            w -= cfg_.lr * cfg_.weight_decay * w;
            w.array() -= cfg_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
        }
    }

    long steps() const { return t_; }
    const AdamWConfig& config() const { return cfg_; }

private:
    AdamWConfig cfg_;
    std::vector<Mat> m_, v_;
    long t_ = 0;
};

/// Rescale gradients so their global norm is at most `max_norm`; returns
/// the norm before clipping.
inline double clip_grad_norm(ParamStore& params, double max_norm) {
    const double norm = params.grad_norm();
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (auto& p : params.items()) p.grad *= s;
    }
    return norm;
}

} // namespace perfgraph

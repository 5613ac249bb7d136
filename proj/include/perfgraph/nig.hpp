#pragma once

#include <array>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/digamma.hpp>

#include "perfgraph/error.hpp"

namespace perfgraph {

/// Normal-Inverse-Gamma parameters of one target: mean gamma, evidence nu,
/// and the inverse-gamma shape/scale alpha, beta.
struct NigParams {
    double gamma = 0.0;
    double nu = 1.0;
    double alpha = 2.0;
    double beta = 1.0;

    bool valid() const {
        return std::isfinite(gamma) && std::isfinite(nu) && std::isfinite(alpha) && std::isfinite(beta) && nu > 0.0 && alpha > 1.0 &&
               beta > 0.0;
    }
};

struct UncertaintyReport {
    double mean = 0.0;
    double aleatoric = 0.0;
    double epistemic = 0.0;
    double total = 0.0;
};

inline UncertaintyReport decompose(const NigParams& p) {
    if (!(p.alpha > 1.0)) fail(ErrorKind::InvalidParams, "alpha must exceed 1");
    if (!(p.nu > 0.0) || !(p.beta > 0.0)) fail(ErrorKind::InvalidParams, "nu and beta must be positive");
    UncertaintyReport r;
    r.mean = p.gamma;
    r.aleatoric = p.beta / (p.alpha - 1.0);
    r.epistemic = r.aleatoric / p.nu;
    r.total = r.aleatoric + r.epistemic;
    return r;
}

/// Scale of the Student-t marginal (2 alpha degrees of freedom, location gamma).
inline double student_t_scale(const NigParams& p) { return std::sqrt(p.beta * (1.0 + p.nu) / (p.nu * p.alpha)); }

/// Negative log marginal likelihood of y under the NIG evidential model.
inline double nig_nll(double y, const NigParams& p) {
    if (!std::isfinite(y) || !p.valid()) fail(ErrorKind::NumericError, "non-finite or invalid NIG input");
    const double omega = 2.0 * p.beta * (1.0 + p.nu);
    const double r = y - p.gamma;
    return 0.5 * std::log(M_PI / p.nu) - p.alpha * std::log(omega) + (p.alpha + 0.5) * std::log(p.nu * r * r + omega) + std::lgamma(p.alpha) -
           std::lgamma(p.alpha + 0.5);
}

/// Partial derivatives with respect to (gamma, nu, alpha, beta).
struct NigGrad {
    double gamma = 0.0, nu = 0.0, alpha = 0.0, beta = 0.0;

    NigGrad& operator+=(const NigGrad& o) {
        gamma += o.gamma;
        nu += o.nu;
        alpha += o.alpha;
        beta += o.beta;
        return *this;
    }
};

inline NigGrad nig_nll_grad(double y, const NigParams& p) {
    const double omega = 2.0 * p.beta * (1.0 + p.nu);
    const double r = y - p.gamma;
    const double a = p.nu * r * r + omega;
    NigGrad g;
    g.gamma = -(p.alpha + 0.5) * 2.0 * p.nu * r / a;
    g.nu = -0.5 / p.nu - p.alpha / (1.0 + p.nu) + (p.alpha + 0.5) * (r * r + 2.0 * p.beta) / a;
    g.alpha = -std::log(omega) + std::log(a) + boost::math::digamma(p.alpha) - boost::math::digamma(p.alpha + 0.5);
    g.beta = -p.alpha / p.beta + (p.alpha + 0.5) * 2.0 * (1.0 + p.nu) / a;
    return g;
}

/// -log density of a location-scale Student-t.
inline double student_t_nll(double y, double loc, double scale, double dof) {
    const double z = (y - loc) / scale;
    return -std::lgamma(0.5 * (dof + 1.0)) + std::lgamma(0.5 * dof) + 0.5 * std::log(dof * M_PI) + std::log(scale) +
           0.5 * (dof + 1.0) * std::log1p(z * z / dof);
}

struct LossConfig {
    double lambda = 0.01;     // evidence regularizer weight
    double rank_weight = 0.1; // ranking loss weight
    double margin = 0.01;     // pairwise ranking margin (normalized makespan units)
};

/// Per-sample evidential term NLL + lambda |y - gamma| (2 nu + alpha).
inline double evidential_term(double y, const NigParams& p, double lambda) {
    return nig_nll(y, p) + lambda * std::abs(y - p.gamma) * (2.0 * p.nu + p.alpha);
}

inline NigGrad evidential_term_grad(double y, const NigParams& p, double lambda) {
    NigGrad g = nig_nll_grad(y, p);
    const double r = y - p.gamma;
    const double sign = r > 0.0 ? 1.0 : r < 0.0 ? -1.0 : 0.0;
    g.gamma += -lambda * sign * (2.0 * p.nu + p.alpha);
    g.nu += 2.0 * lambda * std::abs(r);
    g.alpha += lambda * std::abs(r);
    return g;
}

struct RankPair {
    double gamma_i = 0.0, gamma_j = 0.0;
    double y_i = 0.0, y_j = 0.0;
};

/// Mean pairwise hinge max(0, margin - sign(y_j - y_i)(gamma_j - gamma_i));
/// pairs with equal targets are skipped.
inline double ranking_loss(std::span<const RankPair> pairs, double margin) {
    double sum = 0.0;
    std::size_t used = 0;
    for (const auto& p : pairs) {
        if (p.y_i == p.y_j) continue;
        const double s = p.y_j > p.y_i ? 1.0 : -1.0;
        sum += std::max(0.0, margin - s * (p.gamma_j - p.gamma_i));
        ++used;
    }
    return used ? sum / static_cast<double>(used) : 0.0;
}

/// d ranking_loss / d(gamma_i, gamma_j) per pair.
inline std::vector<std::pair<double, double>> ranking_loss_grad(std::span<const RankPair> pairs, double margin) {
    std::vector<std::pair<double, double>> g(pairs.size(), {0.0, 0.0});
    std::size_t used = 0;
    for (const auto& p : pairs) used += p.y_i != p.y_j;
    if (!used) return g;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto& p = pairs[k];
        if (p.y_i == p.y_j) continue;
        const double s = p.y_j > p.y_i ? 1.0 : -1.0;
        if (margin - s * (p.gamma_j - p.gamma_i) > 0.0) g[k] = {s / static_cast<double>(used), -s / static_cast<double>(used)};
    }
    return g;
}

inline constexpr std::size_t kMetrics = 5;
using NigVector = std::array<NigParams, kMetrics>;
using TargetVector = std::array<double, kMetrics>;

/// Makespan ranking pair between two samples of a batch.
struct SamplePair {
    std::size_t i = 0, j = 0;
};

struct EvidentialLoss {
    double value = 0.0;
    double nll_mean = 0.0;
    double rank = 0.0;
    std::vector<std::array<NigGrad, kMetrics>> grad; // d value / d params per sample and metric
};

/// Batch loss: mean over samples and metrics of the evidential term, plus
/// rank_weight times the makespan ranking loss over the given pairs.
/// Accumulation is sample-major, metric-minor.
inline EvidentialLoss evidential_loss(std::span<const NigVector> pred, std::span<const TargetVector> y, std::span<const SamplePair> pairs,
                                      const LossConfig& cfg) {
    if (pred.empty()) fail(ErrorKind::EmptyBatch, "evidential loss on an empty batch");
    if (pred.size() != y.size()) fail(ErrorKind::InvalidArgument, "prediction/target count mismatch");
    EvidentialLoss out;
    out.grad.resize(pred.size());
    const double scale = 1.0 / static_cast<double>(pred.size() * kMetrics);
    double sum = 0.0, nll = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        for (std::size_t k = 0; k < kMetrics; ++k) {
            const double v = evidential_term(y[i][k], pred[i][k], cfg.lambda);
            if (!std::isfinite(v)) fail(ErrorKind::NumericError, "non-finite evidential loss term");
            sum += v;
            nll += nig_nll(y[i][k], pred[i][k]);
            NigGrad g = evidential_term_grad(y[i][k], pred[i][k], cfg.lambda);
            g.gamma *= scale;
            g.nu *= scale;
            g.alpha *= scale;
            g.beta *= scale;
            out.grad[i][k] = g;
        }
    }
    out.nll_mean = nll * scale;
    out.value = sum * scale;
    if (cfg.rank_weight != 0.0 && !pairs.empty()) {
        std::vector<RankPair> rp;
        for (const auto& p : pairs) rp.push_back({pred[p.i][0].gamma, pred[p.j][0].gamma, y[p.i][0], y[p.j][0]});
        out.rank = ranking_loss(rp, cfg.margin);
        out.value += cfg.rank_weight * out.rank;
        const auto rg = ranking_loss_grad(rp, cfg.margin);
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            out.grad[pairs[k].i][0].gamma += cfg.rank_weight * rg[k].first;
            out.grad[pairs[k].j][0].gamma += cfg.rank_weight * rg[k].second;
        }
    }
    return out;
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Central interval of the Student-t marginal at the given coverage level;
/// `temperature` multiplies the scale (variance by its square).
inline Interval prediction_interval(const NigParams& p, double level, double temperature = 1.0) {
    if (!(level > 0.0 && level < 1.0)) fail(ErrorKind::InvalidArgument, "interval level must lie in (0, 1)");
    if (!p.valid()) fail(ErrorKind::InvalidParams, "invalid NIG parameters");
    const boost::math::students_t_distribution<double> t(2.0 * p.alpha);
    const double q = boost::math::quantile(t, 0.5 + 0.5 * level);
    const double half = q * student_t_scale(p) * temperature;
    return {p.gamma - half, p.gamma + half};
}

} // namespace perfgraph

#pragma once
// Common-information bottleneck: a Gaussian posterior over a latent shared
// by a representation and its synthesized positive, with alignment,
// reconstruction and KL compression losses.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ramm/error.hpp"
#include "ramm/linalg.hpp"
#include "ramm/mlp.hpp"
#include "ramm/random.hpp"

namespace ramm {

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

struct LatentPosterior {
    Vec mu;
    Vec log_var;  // clamped to [kLogVarMin, kLogVarMax]
};

struct CiblParams {
    Mlp f_mu;           // 2d -> hidden -> d_z
    Mlp f_sigma;        // 2d -> hidden -> d_z
    Mlp g_psi;          // d_z -> hidden -> d
    Matrix projection;  // d × d_z; 0×0 when d_z == d (identity)
    double tau = 0.1;

    std::size_t latent_dim() const { return f_mu.output_dim(); }
    std::size_t repr_dim() const { return g_psi.output_dim(); }
    bool has_projection() const { return projection.rows != 0; }

    friend bool operator==(const CiblParams&, const CiblParams&) = default;
};

inline CiblParams make_cibl(std::size_t repr_dim, std::size_t latent_dim, std::size_t hidden, double slope,
                            double tau, Rng& rng) {
    if (!(tau > 0.0)) throw Error("temperature must be positive");
    CiblParams p;
    p.f_mu = make_mlp({2 * repr_dim, hidden, latent_dim}, slope, rng);
    p.f_sigma = make_mlp({2 * repr_dim, hidden, latent_dim}, slope, rng);
    p.g_psi = make_mlp({latent_dim, hidden, repr_dim}, slope, rng);
    if (latent_dim != repr_dim) {
        p.projection = Matrix(repr_dim, latent_dim);
        const double b = 1.0 / std::sqrt(static_cast<double>(latent_dim));
        for (double& w : p.projection.data) w = rng.uniform(-b, b);
    }
    p.tau = tau;
    return p;
}

inline CiblParams zeros_like(const CiblParams& p) {
    CiblParams z;
    z.f_mu = zeros_like(p.f_mu);
    z.f_sigma = zeros_like(p.f_sigma);
    z.g_psi = zeros_like(p.g_psi);
    z.projection = Matrix(p.projection.rows, p.projection.cols);
    z.tau = p.tau;
    return z;
}

struct PosteriorTrace {
    Vec input;  // [h ‖ h⁺]
    MlpTrace mu_trace;
    MlpTrace sigma_trace;
    Vec raw_log_var;
};

inline LatentPosterior posterior(const CiblParams& params, std::span<const double> h, std::span<const double> hplus,
                                 PosteriorTrace* trace = nullptr, RegimeRecorder* regime = nullptr) {
    require_same_size(h.size(), hplus.size(), "posterior inputs");
    Vec input = concat(h, hplus);
    LatentPosterior post;
    post.mu = mlp_forward(params.f_mu, input, trace ? &trace->mu_trace : nullptr, regime);
    Vec raw = mlp_forward(params.f_sigma, input, trace ? &trace->sigma_trace : nullptr, regime);
    post.log_var.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (regime) {
            regime->record(raw[i] < kLogVarMin);
            regime->record(raw[i] > kLogVarMax);
        }
        post.log_var[i] = std::clamp(raw[i], kLogVarMin, kLogVarMax);
    }
    if (trace) {
        trace->input = std::move(input);
        trace->raw_log_var = std::move(raw);
    }
    return post;
}

/// z = μ + exp(log σ² / 2) ⊙ ε. An empty ε selects the mean (inference mode).
inline Vec sample_z(const LatentPosterior& post, std::span<const double> eps) {
    if (eps.empty()) return post.mu;
    require_same_size(eps.size(), post.mu.size(), "sample_z");
    Vec z(post.mu.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = post.mu[i] + std::exp(0.5 * post.log_var[i]) * eps[i];
    return z;
}

inline Vec sample_z(const LatentPosterior& post, Rng& rng) {
    Vec eps(post.mu.size());
    for (double& e : eps) e = rng.normal();
    return sample_z(post, eps);
}

/// Maps z into the representation space before comparing with h⁺.
inline Vec project_latent(const CiblParams& params, std::span<const double> z) {
    if (!params.has_projection()) {
        require_same_size(z.size(), params.repr_dim(), "latent projection");
        return Vec(z.begin(), z.end());
    }
    return matvec(params.projection, z);
}

/// KL(N(μ, σ²) ‖ N(0, I)) = ½ Σ (σ² + μ² − 1 − log σ²)
inline double compress_loss(const LatentPosterior& post) {
    require_same_size(post.mu.size(), post.log_var.size(), "compress_loss");
    double s = 0.0;
    for (std::size_t i = 0; i < post.mu.size(); ++i) {
        const double lv = post.log_var[i];
        s += std::expm1(lv) - lv + post.mu[i] * post.mu[i];
    }
    return 0.5 * s;
}

/// ‖g_ψ(z) − h‖²
inline double recon_loss(const CiblParams& params, std::span<const double> z, std::span<const double> h) {
    const Vec rec = mlp_forward(params.g_psi, z);
    require_same_size(rec.size(), h.size(), "recon_loss");
    return squared_distance(rec, h);
}

struct AlignGrad {
    double loss = 0.0;
    std::vector<Vec> d_anchor;
    std::vector<Vec> d_target;
};

/// Batch-mean InfoNCE: row u scores anchor u against every target, with the
/// u-th target as the positive and the other targets as negatives.
inline AlignGrad align_loss_with_grad(const std::vector<Vec>& anchors, const std::vector<Vec>& targets, double tau,
                                      bool want_grad = true) {
    const std::size_t B = anchors.size();
    if (B < 2) throw Error("align_loss needs a batch of at least 2");
    require_same_size(targets.size(), B, "align_loss batch");
    if (!(tau > 0.0)) throw Error("temperature must be positive");

    std::vector<double> anorm(B), tnorm(B);
    for (std::size_t i = 0; i < B; ++i) {
        require_same_size(anchors[i].size(), targets[i].size(), "align_loss vectors");
        anorm[i] = norm2(anchors[i]);
        tnorm[i] = norm2(targets[i]);
        if (anorm[i] == 0.0 || tnorm[i] == 0.0) throw NumericError("align_loss: zero vector");
    }
    Matrix sim(B, B);
    for (std::size_t u = 0; u < B; ++u) {
        for (std::size_t j = 0; j < B; ++j) sim(u, j) = dot(anchors[u], targets[j]) / (anorm[u] * tnorm[j]);
    }

    AlignGrad out;
    Matrix dsim(B, B);
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t u = 0; u < B; ++u) {
        double m = sim(u, 0) / tau;
        std::size_t arg = 0;
        for (std::size_t j = 1; j < B; ++j) {
            if (sim(u, j) / tau > m) {
                m = sim(u, j) / tau;
                arg = j;
            }
        }
        double rest = 0.0;
        for (std::size_t j = 0; j < B; ++j) {
            if (j != arg) rest += std::exp(sim(u, j) / tau - m);
        }
        const double lse = m + std::log1p(rest);
        // Grouped so a confident row keeps its tiny loss instead of losing it to lse's magnitude.
        out.loss += ((m - sim(u, u) / tau) + std::log1p(rest)) * inv_b;
        if (want_grad) {
            for (std::size_t j = 0; j < B; ++j) {
                const double prob = std::exp(sim(u, j) / tau - lse);
                dsim(u, j) = (prob - (j == u ? 1.0 : 0.0)) * inv_b / tau;
            }
        }
    }
    if (!want_grad) return out;

    // d cos(a, t) / da = t / (|a||t|) − cos · a / |a|²
    out.d_anchor.assign(B, Vec(anchors[0].size(), 0.0));
    out.d_target.assign(B, Vec(anchors[0].size(), 0.0));
    for (std::size_t u = 0; u < B; ++u) {
        for (std::size_t j = 0; j < B; ++j) {
            const double g = dsim(u, j);
            if (g == 0.0) continue;
            const double c = sim(u, j);
            axpy(g / (anorm[u] * tnorm[j]), targets[j], out.d_anchor[u]);
            axpy(-g * c / (anorm[u] * anorm[u]), anchors[u], out.d_anchor[u]);
            axpy(g / (anorm[u] * tnorm[j]), anchors[u], out.d_target[j]);
            axpy(-g * c / (tnorm[j] * tnorm[j]), targets[j], out.d_target[j]);
        }
    }
    return out;
}

inline double align_loss(const std::vector<Vec>& anchors, const std::vector<Vec>& targets, double tau) {
    return align_loss_with_grad(anchors, targets, tau, false).loss;
}

/// Alignment between latents and synthesized positives, projecting z when
/// the latent and representation dimensions differ.
inline double align_loss(const CiblParams& params, const std::vector<Vec>& z_batch, const std::vector<Vec>& hplus_batch) {
    std::vector<Vec> anchors;
    anchors.reserve(z_batch.size());
    for (const Vec& z : z_batch) anchors.push_back(project_latent(params, z));
    return align_loss(anchors, hplus_batch, params.tau);
}

}  // namespace ramm

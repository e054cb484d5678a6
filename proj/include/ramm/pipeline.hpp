#pragma once
// One mini-batch of the full objective: demonstration-conditioned
// classification (BCE) plus the bottleneck losses over attention-synthesized
// positives, with gradients for every parameter group.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ramm/cibl.hpp"
#include "ramm/corpus.hpp"
#include "ramm/encoder.hpp"
#include "ramm/error.hpp"
#include "ramm/fusion.hpp"
#include "ramm/model.hpp"

namespace ramm {

/// What the auxiliary (non-classification) objective looks like.
enum class AuxObjective {
    cibl,                // posterior, sampled latent, align + recon + compress
    force_align,         // latent replaced by h_u; align only
    simple_contrastive,  // symmetric InfoNCE between h_u and h⁺ at unit weight
};

struct LossWeights {
    double align = 0.2;
    double recon = 0.1;
    double compress = 0.2;

    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossBreakdown {
    double alpha = 0.0;
    double align = 0.0;
    double recon = 0.0;
    double compress = 0.0;
    double total = 0.0;

    friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

/// total = alpha + λ₁·align + λ₂·recon + λ₃·compress
inline LossBreakdown total_loss(double alpha, double align, double recon, double compress, const LossWeights& w) {
    return {alpha, align, recon, compress, alpha + w.align * align + w.recon * recon + w.compress * compress};
}

/// −(1/N) Σ [y log ŷ + (1 − y) log(1 − ŷ)] with ŷ clamped into [ε, 1 − ε].
inline double bce_loss(std::span<const double> predictions, std::span<const int> labels, double eps = 1e-7) {
    if (predictions.empty()) throw Error("bce_loss: empty batch");
    require_same_size(predictions.size(), labels.size(), "bce_loss");
    double s = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double p = std::clamp(predictions[i], eps, 1.0 - eps);
        s += labels[i] ? std::log(p) : std::log1p(-p);
    }
    return -s / static_cast<double>(predictions.size());
}

struct BatchOptions {
    AuxObjective objective = AuxObjective::cibl;
    LossWeights weights;
    bool backprop_neighbors = false;
    double bce_epsilon = 1e-7;

    /// Weights actually applied for this objective.
    LossWeights effective_weights() const {
        switch (objective) {
            case AuxObjective::force_align: return {weights.align, 0.0, 0.0};
            case AuxObjective::simple_contrastive: return {1.0, 0.0, 0.0};
            case AuxObjective::cibl: break;
        }
        return weights;
    }
};

struct BatchExample {
    const NewsItem* item = nullptr;
    const NewsItem* demo = nullptr;  // null: classify from the plain encoding
    Vec query_key;                   // narrative (or feature) key of the item
    std::vector<const NewsItem*> candidates;
    std::vector<Vec> candidate_keys;
    Vec eps;  // reparameterization noise; empty selects the posterior mean
};

struct BatchResult {
    LossBreakdown loss;
    std::vector<double> predictions;
    std::uint64_t regime_hash = 0;
    std::size_t demo_encodes = 0;
};

namespace detail {

struct ItemState {
    MlpTrace pre_trace;
    Vec h_pre;
    double yhat = 0.0;
    bool clamped = false;

    MlpTrace h_trace;
    Vec h;
    std::vector<MlpTrace> cand_traces;
    std::vector<Vec> cand_h;
    AttentionTrace attention;
    Vec hplus;

    PosteriorTrace post_trace;
    LatentPosterior post;
    Vec z;
    MlpTrace g_trace;
    Vec reconstruction;
    Vec anchor;
};

}  // namespace detail

/// Forward pass over a batch; when `grad` is non-null, accumulates dL_total/dθ
/// into it (it must have the model's shapes, e.g. from zeros_like).
/// `neighbor_encoder`, when set, encodes candidates in place of the model's
/// encoder; finite differences use it to hold stopped neighbors fixed.
inline BatchResult batch_loss(const Model& model, std::span<const BatchExample> batch, const BatchOptions& opts,
                              Model* grad = nullptr, const EncoderParams* neighbor_encoder = nullptr) {
    const std::size_t B = batch.size();
    if (B < 2) throw Error("a training batch needs at least 2 items");
    const LossWeights w = opts.effective_weights();
    const double inv_b = 1.0 / static_cast<double>(B);
    const EncoderParams& enc = model.encoder;
    const EncoderParams& cand_enc = neighbor_encoder ? *neighbor_encoder : enc;

    RegimeRecorder regime;
    BatchResult result;
    std::vector<detail::ItemState> st(B);
    std::vector<Vec> anchors(B), hplus(B);
    double alpha = 0.0, recon = 0.0, compress = 0.0;

    for (std::size_t u = 0; u < B; ++u) {
        const BatchExample& ex = batch[u];
        auto& s = st[u];

        if (ex.demo) {
            s.h_pre = encode_with_demo(enc, *ex.item, *ex.demo, &s.pre_trace, &regime);
            ++result.demo_encodes;
        } else {
            s.h_pre = encode(enc, *ex.item, &s.pre_trace, &regime);
        }
        const double raw = sigmoid(classifier_logit(model.head, s.h_pre));
        s.clamped = raw < opts.bce_epsilon || raw > 1.0 - opts.bce_epsilon;
        regime.record(s.clamped);
        s.yhat = std::clamp(raw, opts.bce_epsilon, 1.0 - opts.bce_epsilon);
        alpha -= (ex.item->label ? std::log(s.yhat) : std::log1p(-s.yhat)) * inv_b;
        result.predictions.push_back(s.yhat);

        s.h = encode(enc, *ex.item, &s.h_trace, &regime);
        if (ex.candidates.empty()) {
            s.hplus = s.h;
        } else {
            require_same_size(ex.candidates.size(), ex.candidate_keys.size(), "candidate keys");
            s.cand_traces.resize(ex.candidates.size());
            for (std::size_t i = 0; i < ex.candidates.size(); ++i) {
                s.cand_h.push_back(encode(cand_enc, *ex.candidates[i], &s.cand_traces[i], &regime));
            }
            const Vec p = attention_weights(model.attention, ex.query_key, ex.candidate_keys, &s.attention, &regime);
            s.hplus = synthesize_positive(p, s.cand_h);
        }
        hplus[u] = s.hplus;

        if (opts.objective == AuxObjective::cibl) {
            s.post = posterior(model.cibl, s.h, s.hplus, &s.post_trace, &regime);
            s.z = sample_z(s.post, ex.eps);
            s.anchor = project_latent(model.cibl, s.z);
            s.reconstruction = mlp_forward(model.cibl.g_psi, s.z, &s.g_trace, &regime);
            recon += squared_distance(s.reconstruction, s.h) * inv_b;
            compress += compress_loss(s.post) * inv_b;
        } else {
            s.anchor = s.h;
        }
        anchors[u] = s.anchor;
    }

    AlignGrad ag = align_loss_with_grad(anchors, hplus, model.cibl.tau, grad != nullptr);
    double align = ag.loss;
    if (opts.objective == AuxObjective::simple_contrastive) {
        AlignGrad back = align_loss_with_grad(hplus, anchors, model.cibl.tau, grad != nullptr);
        align = 0.5 * (ag.loss + back.loss);
        if (grad) {
            for (std::size_t u = 0; u < B; ++u) {
                for (std::size_t i = 0; i < ag.d_anchor[u].size(); ++i) {
                    ag.d_anchor[u][i] = 0.5 * (ag.d_anchor[u][i] + back.d_target[u][i]);
                    ag.d_target[u][i] = 0.5 * (ag.d_target[u][i] + back.d_anchor[u][i]);
                }
            }
        }
    }

    result.loss = total_loss(alpha, align, recon, compress, w);
    result.regime_hash = regime.hash();
    if (!grad) return result;

    for (std::size_t u = 0; u < B; ++u) {
        const BatchExample& ex = batch[u];
        auto& s = st[u];

        // Classification path.
        const double dlogit = s.clamped ? 0.0 : (s.yhat - ex.item->label) * inv_b;
        axpy(dlogit, s.h_pre, grad->head.weight);
        grad->head.bias += dlogit;
        Vec dh_pre(model.head.weight.size());
        for (std::size_t i = 0; i < dh_pre.size(); ++i) dh_pre[i] = dlogit * model.head.weight[i];
        mlp_backward(enc.net, s.pre_trace, dh_pre, &grad->encoder.net);

        // Auxiliary path.
        const std::size_t d = s.h.size();
        Vec dh(d, 0.0);
        Vec dhplus(d, 0.0);
        axpy(w.align, ag.d_target[u], dhplus);

        if (opts.objective == AuxObjective::cibl) {
            Vec danchor(d, 0.0);
            axpy(w.align, ag.d_anchor[u], danchor);
            Vec dz(s.z.size(), 0.0);
            if (model.cibl.has_projection()) {
                outer_accumulate(grad->cibl.projection, danchor, s.z);
                matvec_transposed_accumulate(model.cibl.projection, danchor, dz);
            } else {
                dz = danchor;
            }

            Vec dg(d);
            for (std::size_t i = 0; i < d; ++i) dg[i] = w.recon * 2.0 * (s.reconstruction[i] - s.h[i]) * inv_b;
            const Vec dz_rec = mlp_backward(model.cibl.g_psi, s.g_trace, dg, &grad->cibl.g_psi);
            axpy(1.0, dz_rec, dz);
            axpy(-1.0, dg, dh);

            const std::size_t dzn = s.z.size();
            Vec dmu(dzn), dlv(dzn);
            for (std::size_t i = 0; i < dzn; ++i) {
                const double lv = s.post.log_var[i];
                dmu[i] = dz[i] + w.compress * s.post.mu[i] * inv_b;
                dlv[i] = w.compress * 0.5 * std::expm1(lv) * inv_b;
                if (!ex.eps.empty()) dlv[i] += dz[i] * ex.eps[i] * 0.5 * std::exp(0.5 * lv);
                const double raw = s.post_trace.raw_log_var[i];
                if (raw < kLogVarMin || raw > kLogVarMax) dlv[i] = 0.0;
            }
            const Vec dc_mu = mlp_backward(model.cibl.f_mu, s.post_trace.mu_trace, dmu, &grad->cibl.f_mu);
            const Vec dc_sigma = mlp_backward(model.cibl.f_sigma, s.post_trace.sigma_trace, dlv, &grad->cibl.f_sigma);
            for (std::size_t i = 0; i < d; ++i) {
                dh[i] += dc_mu[i] + dc_sigma[i];
                dhplus[i] += dc_mu[d + i] + dc_sigma[d + i];
            }
        } else {
            axpy(w.align, ag.d_anchor[u], dh);
        }

        if (!ex.candidates.empty()) {
            const std::size_t n = ex.candidates.size();
            Vec dp(n);
            for (std::size_t i = 0; i < n; ++i) dp[i] = dot(dhplus, s.cand_h[i]);
            attention_backward(model.attention, ex.query_key, ex.candidate_keys, s.attention, dp, grad->attention);
            if (opts.backprop_neighbors) {
                for (std::size_t i = 0; i < n; ++i) {
                    Vec dcand(d);
                    for (std::size_t r = 0; r < d; ++r) dcand[r] = s.attention.weights[i] * dhplus[r];
                    mlp_backward(enc.net, s.cand_traces[i], dcand, &grad->encoder.net);
                }
            }
        }
        mlp_backward(enc.net, s.h_trace, dh, &grad->encoder.net);
    }
    return result;
}

}  // namespace ramm

#pragma once
// Attention over retrieved candidates and the synthesized positive.
//
//   w_i = LeakyReLU(aᵀ [W e_query ‖ W e_i]),  p = softmax(w),  h⁺ = Σ p_i h_i

#include <cmath>
#include <string>
#include <vector>

#include "ramm/error.hpp"
#include "ramm/linalg.hpp"
#include "ramm/mlp.hpp"
#include "ramm/random.hpp"

namespace ramm {

struct AttentionParams {
    Matrix adapter;  // W: repr_dim × key_dim
    Vec score;       // a: 2 * repr_dim
    double slope = 0.2;

    std::size_t repr_dim() const { return adapter.rows; }
    std::size_t key_dim() const { return adapter.cols; }

    friend bool operator==(const AttentionParams&, const AttentionParams&) = default;
};

inline AttentionParams make_attention(std::size_t repr_dim, std::size_t key_dim, double slope, Rng& rng) {
    AttentionParams p{Matrix(repr_dim, key_dim), Vec(2 * repr_dim), slope};
    const double wb = 1.0 / std::sqrt(static_cast<double>(key_dim));
    for (double& w : p.adapter.data) w = rng.uniform(-wb, wb);
    const double ab = 1.0 / std::sqrt(static_cast<double>(2 * repr_dim));
    for (double& a : p.score) a = rng.uniform(-ab, ab);
    return p;
}

inline AttentionParams zeros_like(const AttentionParams& p) {
    return {Matrix(p.adapter.rows, p.adapter.cols), Vec(p.score.size(), 0.0), p.slope};
}

struct AttentionTrace {
    Vec query_proj;
    std::vector<Vec> candidate_proj;
    Vec raw_scores;  // before the rectifier
    Vec weights;     // p
};

inline Vec attention_weights(const AttentionParams& params, std::span<const double> query,
                             const std::vector<Vec>& candidates, AttentionTrace* trace = nullptr,
                             RegimeRecorder* regime = nullptr) {
    if (candidates.empty()) throw Error("attention over an empty candidate set");
    require_same_size(query.size(), params.key_dim(), "attention query");
    const std::size_t d = params.repr_dim();
    const std::span<const double> a_query(params.score.data(), d);
    const std::span<const double> a_cand(params.score.data() + d, d);

    Vec q = matvec(params.adapter, query);
    const double query_term = dot(a_query, q);
    Vec raw(candidates.size()), w(candidates.size());
    std::vector<Vec> proj;
    proj.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        require_same_size(candidates[i].size(), params.key_dim(), "attention candidate");
        proj.push_back(matvec(params.adapter, candidates[i]));
        raw[i] = query_term + dot(a_cand, proj.back());
        if (regime) regime->record(raw[i] > 0.0);
        w[i] = leaky_relu(raw[i], params.slope);
    }
    Vec p = softmax(w);
    if (trace) {
        trace->query_proj = std::move(q);
        trace->candidate_proj = std::move(proj);
        trace->raw_scores = std::move(raw);
        trace->weights = p;
    }
    return p;
}

/// Accumulates dL/dW and dL/da given dL/dp.
inline void attention_backward(const AttentionParams& params, std::span<const double> query,
                               const std::vector<Vec>& candidates, const AttentionTrace& trace,
                               std::span<const double> dp, AttentionParams& grad) {
    const std::size_t n = candidates.size();
    const std::size_t d = params.repr_dim();
    require_same_size(dp.size(), n, "attention weight gradient");
    const Vec& p = trace.weights;
    double pdp = 0.0;
    for (std::size_t i = 0; i < n; ++i) pdp += p[i] * dp[i];

    const std::span<const double> a_query(params.score.data(), d);
    const std::span<const double> a_cand(params.score.data() + d, d);
    std::span<double> ga_query(grad.score.data(), d);
    std::span<double> ga_cand(grad.score.data() + d, d);

    double dquery_term = 0.0;
    Vec dk(d);
    for (std::size_t i = 0; i < n; ++i) {
        const double dw = p[i] * (dp[i] - pdp);
        const double ds = dw * leaky_relu_grad(trace.raw_scores[i], params.slope);
        dquery_term += ds;
        axpy(ds, trace.candidate_proj[i], ga_cand);
        for (std::size_t r = 0; r < d; ++r) dk[r] = a_cand[r] * ds;
        outer_accumulate(grad.adapter, dk, candidates[i]);
    }
    axpy(dquery_term, trace.query_proj, ga_query);
    Vec dq(d);
    for (std::size_t r = 0; r < d; ++r) dq[r] = a_query[r] * dquery_term;
    outer_accumulate(grad.adapter, dq, query);
}

/// Σ p_i h_i. `p` must lie on the probability simplex within 1e-6.
inline Vec synthesize_positive(std::span<const double> p, const std::vector<Vec>& reprs) {
    if (reprs.empty()) throw Error("synthesize_positive: no candidates");
    require_same_size(p.size(), reprs.size(), "synthesize_positive");
    double total = 0.0;
    for (double x : p) {
        if (!(x >= -1e-6)) throw NumericError("synthesize_positive: negative weight");
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-6) throw NumericError("synthesize_positive: weights do not sum to 1");
    Vec out(reprs.front().size(), 0.0);
    for (std::size_t i = 0; i < reprs.size(); ++i) {
        require_same_size(reprs[i].size(), out.size(), "synthesize_positive");
        axpy(p[i], reprs[i], out);
    }
    return out;
}

}  // namespace ramm

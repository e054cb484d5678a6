#pragma once
// Fully connected layers with leaky-rectifier hidden activations and a linear
// output layer, with a hand-written backward pass.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ramm/error.hpp"
#include "ramm/linalg.hpp"
#include "ramm/random.hpp"

namespace ramm {

/// Collects the branch taken at every piecewise point (rectifier sign,
/// clamp engagement) into a hash. Two evaluations with equal hashes ran on
/// the same smooth piece.
class RegimeRecorder {
public:
    void record(bool branch) {
        hash_ = (hash_ ^ (branch ? 0x9e3779b97f4a7c15ULL : 0x632be59bd9b4e019ULL)) * 0x100000001b3ULL;
        ++count_;
    }
    std::uint64_t hash() const { return hash_; }
    std::size_t count() const { return count_; }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
    std::size_t count_ = 0;
};

struct Dense {
    Matrix weight;  // out × in
    Vec bias;       // out

    std::size_t input_dim() const { return weight.cols; }
    std::size_t output_dim() const { return weight.rows; }

    friend bool operator==(const Dense&, const Dense&) = default;
};

inline Dense make_dense(std::size_t in, std::size_t out, Rng& rng) {
    Dense d{Matrix(out, in), Vec(out, 0.0)};
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& w : d.weight.data) w = rng.uniform(-bound, bound);
    for (double& b : d.bias) b = rng.uniform(-bound, bound);
    return d;
}

inline Dense zeros_like(const Dense& d) { return {Matrix(d.weight.rows, d.weight.cols), Vec(d.bias.size(), 0.0)}; }

inline Vec dense_forward(const Dense& d, std::span<const double> x) {
    Vec y = matvec(d.weight, x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += d.bias[i];
    return y;
}

/// Accumulates weight/bias gradients into `grad`, returns dL/dx.
inline Vec dense_backward(const Dense& d, std::span<const double> x, std::span<const double> dy, Dense* grad) {
    if (grad) {
        outer_accumulate(grad->weight, dy, x);
        axpy(1.0, dy, grad->bias);
    }
    Vec dx(d.input_dim(), 0.0);
    matvec_transposed_accumulate(d.weight, dy, dx);
    return dx;
}

struct Mlp {
    std::vector<Dense> layers;
    double slope = 0.01;

    std::size_t input_dim() const { return layers.front().input_dim(); }
    std::size_t output_dim() const { return layers.back().output_dim(); }

    friend bool operator==(const Mlp&, const Mlp&) = default;
};

/// sizes = {in, hidden..., out}
inline Mlp make_mlp(const std::vector<std::size_t>& sizes, double slope, Rng& rng) {
    if (sizes.size() < 2) throw Error("an MLP needs at least an input and an output size");
    Mlp m;
    m.slope = slope;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        if (sizes[l] == 0 || sizes[l + 1] == 0) throw DimensionError("MLP layer sizes must be positive");
        m.layers.push_back(make_dense(sizes[l], sizes[l + 1], rng));
    }
    return m;
}

inline Mlp zeros_like(const Mlp& m) {
    Mlp z;
    z.slope = m.slope;
    for (const Dense& d : m.layers) z.layers.push_back(zeros_like(d));
    return z;
}

struct MlpTrace {
    std::vector<Vec> inputs;   // input to each layer
    std::vector<Vec> preacts;  // affine output of each layer
};

inline Vec mlp_forward(const Mlp& m, std::span<const double> x, MlpTrace* trace = nullptr,
                       RegimeRecorder* regime = nullptr) {
    require_same_size(x.size(), m.input_dim(), "mlp input");
    if (trace) {
        trace->inputs.clear();
        trace->preacts.clear();
    }
    Vec cur(x.begin(), x.end());
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        Vec pre = dense_forward(m.layers[l], cur);
        if (!all_finite(pre)) throw NumericError("non-finite activation at layer " + std::to_string(l));
        if (trace) {
            trace->inputs.push_back(std::move(cur));
            trace->preacts.push_back(pre);
        }
        if (l + 1 < m.layers.size()) {
            for (double& v : pre) {
                if (regime) regime->record(v > 0.0);
                v = leaky_relu(v, m.slope);
            }
        }
        cur = std::move(pre);
    }
    return cur;
}

/// Backward through a traced forward pass. Accumulates into `grad` when given.
inline Vec mlp_backward(const Mlp& m, const MlpTrace& trace, std::span<const double> dout, Mlp* grad) {
    require_same_size(dout.size(), m.output_dim(), "mlp output gradient");
    Vec d(dout.begin(), dout.end());
    for (std::size_t l = m.layers.size(); l-- > 0;) {
        if (l + 1 < m.layers.size()) {
            const Vec& pre = trace.preacts[l];
            for (std::size_t i = 0; i < d.size(); ++i) d[i] *= leaky_relu_grad(pre[i], m.slope);
        }
        d = dense_backward(m.layers[l], trace.inputs[l], d, grad ? &grad->layers[l] : nullptr);
    }
    return d;
}

}  // namespace ramm

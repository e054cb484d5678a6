#pragma once
// Decoupled-weight-decay Adam and a linear-warmup / cosine-decay schedule.

#include <cmath>
#include <numbers>

#include "ramm/model.hpp"

namespace ramm {

struct AdamWConfig {
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// lr·s/warmup for s ≤ warmup, then cosine decay to zero at total_steps.
/// Steps are 1-based.
struct LrSchedule {
    double base_lr = 1e-4;
    std::size_t warmup_steps = 100;
    std::size_t total_steps = 1000;

    double at(std::size_t step) const {
        if (warmup_steps > 0 && step <= warmup_steps) {
            return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
        }
        const double span = total_steps > warmup_steps ? static_cast<double>(total_steps - warmup_steps) : 1.0;
        const double progress = std::min(1.0, static_cast<double>(step - warmup_steps) / span);
        return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
    }
};

class AdamW {
public:
    AdamW(const Model& model, AdamWConfig cfg) : cfg_(cfg), first_(zeros_like(model)), second_(zeros_like(model)) {}

    std::size_t steps_taken() const { return t_; }

    void step(Model& model, Model& grad, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        auto params = parameters(model);
        auto grads = parameters(grad);
        auto m = parameters(first_);
        auto v = parameters(second_);
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto theta = params[k].values;
            auto g = grads[k].values;
            auto mk = m[k].values;
            auto vk = v[k].values;
            for (std::size_t i = 0; i < theta.size(); ++i) {
                theta[i] -= lr * cfg_.weight_decay * theta[i];
                mk[i] = cfg_.beta1 * mk[i] + (1.0 - cfg_.beta1) * g[i];
                vk[i] = cfg_.beta2 * vk[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                theta[i] -= lr * (mk[i] / c1) / (std::sqrt(vk[i] / c2) + cfg_.eps);
            }
        }
    }

private:
    AdamWConfig cfg_;
    Model first_;
    Model second_;
    std::size_t t_ = 0;
};

}  // namespace ramm

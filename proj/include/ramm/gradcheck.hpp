#pragma once
// Central finite-difference verification of analytic gradients.
//
// Step per entry is 1e-5·max(1, |θ|). Relative error is
// |analytic − numeric| / max(|analytic|, |numeric|, 1e-6); the floor keeps
// entries whose true gradient is ~0 from dividing round-off by round-off.
// Entries whose ± perturbation crosses a piecewise boundary (rectifier sign,
// clamp) are skipped and counted, since the difference quotient is not a
// derivative there.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ramm/error.hpp"
#include "ramm/model.hpp"
#include "ramm/pipeline.hpp"

namespace ramm {

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckFloor = 1e-6;

struct GroupError {
    std::string group;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;
    bool passed = true;
};

struct GradCheckReport {
    double tolerance = 1e-4;
    std::vector<GroupError> groups;
    bool passed = true;

    const GroupError* worst() const {
        const GroupError* w = nullptr;
        for (const auto& g : groups) {
            if (!w || g.max_rel_error > w->max_rel_error) w = &g;
        }
        return w;
    }
    std::vector<std::string> failing_groups() const {
        std::vector<std::string> out;
        for (const auto& g : groups) {
            if (!g.passed) out.push_back(g.group);
        }
        return out;
    }
};

inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
}

inline double fd_step(double theta) { return kGradCheckStep * std::max(1.0, std::abs(theta)); }

/// Checks a scalar function of a flat parameter vector against `analytic`.
inline GradCheckReport grad_check(const std::function<double(std::span<const double>)>& f, Vec theta,
                                  std::span<const double> analytic, double tolerance,
                                  const std::string& group = "params") {
    require_same_size(theta.size(), analytic.size(), "grad_check");
    GroupError g{group};
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double orig = theta[i];
        const double h = fd_step(orig);
        theta[i] = orig + h;
        const double fp = f(theta);
        theta[i] = orig - h;
        const double fm = f(theta);
        theta[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) throw NumericError("non-finite loss at a perturbed point");
        g.max_rel_error = std::max(g.max_rel_error, relative_error(analytic[i], (fp - fm) / (2.0 * h)));
        ++g.checked;
    }
    g.passed = g.max_rel_error <= tolerance;
    return {tolerance, {g}, g.passed};
}

/// Checks dL_total/dθ of batch_loss for every parameter group. `tamper`, when
/// set, edits the analytic gradient before comparison (negative controls).
/// `stride` > 1 checks every stride-th entry of each tensor.
inline GradCheckReport grad_check_model(Model model, std::span<const BatchExample> batch, const BatchOptions& opts,
                                        double tolerance, const std::function<void(Model&)>& tamper = {},
                                        std::size_t stride = 1) {
    Model analytic = zeros_like(model);
    const BatchResult base = batch_loss(model, batch, opts, &analytic);
    // Stopped neighbors are constants of the step, so the probes must not re-encode them.
    const EncoderParams frozen = model.encoder;
    const EncoderParams* neighbors = opts.backprop_neighbors ? nullptr : &frozen;
    if (tamper) tamper(analytic);

    std::map<std::string, GroupError> groups;
    std::vector<std::string> order;
    auto params = parameters(model);
    auto grads = parameters(analytic);
    for (std::size_t k = 0; k < params.size(); ++k) {
        const std::string group = param_group(params[k].name);
        if (!groups.count(group)) {
            groups.emplace(group, GroupError{group});
            order.push_back(group);
        }
        GroupError& g = groups[group];
        auto theta = params[k].values;
        for (std::size_t i = 0; i < theta.size(); i += std::max<std::size_t>(1, stride)) {
            const double orig = theta[i];
            const double h = fd_step(orig);
            theta[i] = orig + h;
            const BatchResult plus = batch_loss(model, batch, opts, nullptr, neighbors);
            theta[i] = orig - h;
            const BatchResult minus = batch_loss(model, batch, opts, nullptr, neighbors);
            theta[i] = orig;
            if (!std::isfinite(plus.loss.total) || !std::isfinite(minus.loss.total)) {
                throw NumericError("non-finite loss at a perturbed point of " + params[k].name);
            }
            if (plus.regime_hash != base.regime_hash || minus.regime_hash != base.regime_hash) {
                ++g.skipped;
                continue;
            }
            const double numeric = (plus.loss.total - minus.loss.total) / (2.0 * h);
            g.max_rel_error = std::max(g.max_rel_error, relative_error(grads[k].values[i], numeric));
            ++g.checked;
        }
    }

    GradCheckReport report;
    report.tolerance = tolerance;
    for (const auto& name : order) {
        GroupError g = groups[name];
        g.passed = g.max_rel_error <= tolerance;
        report.passed = report.passed && g.passed;
        report.groups.push_back(g);
    }
    return report;
}

}  // namespace ramm

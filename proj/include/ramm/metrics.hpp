#pragma once
// Binary classification metrics: accuracy, F1 on the fake class, and AUC as
// the Mann–Whitney statistic with midranks for ties.

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ramm/error.hpp"
#include "ramm/linalg.hpp"

namespace ramm {

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    double accuracy() const { return total() ? static_cast<double>(tp + tn) / static_cast<double>(total()) : 0.0; }
    /// 2TP / (2TP + FP + FN); zero when there are no positives at all.
    double f1() const {
        const std::size_t denom = 2 * tp + fp + fn;
        return denom ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
    }

    friend bool operator==(const Confusion&, const Confusion&) = default;
};

inline Confusion confusion(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
    require_same_size(scores.size(), labels.size(), "confusion");
    Confusion c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        if (labels[i]) {
            pred ? ++c.tp : ++c.fn;
        } else {
            pred ? ++c.fp : ++c.tn;
        }
    }
    return c;
}

/// Absent when either class is missing.
inline std::optional<double> auc_mann_whitney(std::span<const double> scores, std::span<const int> labels) {
    require_same_size(scores.size(), labels.size(), "auc");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    double pos_rank_sum = 0.0;
    std::size_t npos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i]) {
            pos_rank_sum += rank[i];
            ++npos;
        }
    }
    const std::size_t nneg = n - npos;
    if (npos == 0 || nneg == 0) return std::nullopt;
    const double np = static_cast<double>(npos);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(nneg));
}

struct DomainMetrics {
    double accuracy = 0.0;
    double f1 = 0.0;
    Confusion counts;
};

struct EvalReport {
    double accuracy = 0.0;
    double f1 = 0.0;
    std::optional<double> auc;
    Confusion counts;
    std::map<std::string, DomainMetrics> per_domain;
    std::size_t demonstrations_used = 0;
};

/// Builds a report from per-item scores; `domains` may be empty.
inline EvalReport make_report(std::span<const double> scores, std::span<const int> labels,
                              std::span<const std::string> domains, double threshold = 0.5) {
    if (scores.empty()) throw Error("cannot evaluate an empty split");
    EvalReport r;
    r.counts = confusion(scores, labels, threshold);
    r.accuracy = r.counts.accuracy();
    r.f1 = r.counts.f1();
    r.auc = auc_mann_whitney(scores, labels);
    if (!domains.empty()) {
        require_same_size(domains.size(), scores.size(), "per-domain report");
        std::map<std::string, std::pair<std::vector<double>, std::vector<int>>> groups;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            groups[domains[i]].first.push_back(scores[i]);
            groups[domains[i]].second.push_back(labels[i]);
        }
        for (const auto& [domain, g] : groups) {
            DomainMetrics m;
            m.counts = confusion(g.first, g.second, threshold);
            m.accuracy = m.counts.accuracy();
            m.f1 = m.counts.f1();
            r.per_domain.emplace(domain, m);
        }
    }
    return r;
}

}  // namespace ramm

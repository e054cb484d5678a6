#pragma once
// Synthetic "narrative cluster" corpora: groups of items whose features differ
// but whose narrative embeddings share a common center. Cluster identity, not
// any single item's features, determines the label.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "ramm/corpus.hpp"
#include "ramm/embeddings.hpp"
#include "ramm/error.hpp"
#include "ramm/random.hpp"

namespace ramm {

enum class LabelRule { per_cluster, feature_threshold };

struct SynthConfig {
    std::size_t num_clusters = 8;
    std::size_t items_per_cluster = 50;
    std::size_t num_domains = 3;
    std::size_t text_dim = 16;
    std::size_t image_dim = 16;
    std::size_t narrative_dim = 32;
    double noise_scale = 0.1;
    // Feature noise is noise_scale * feature_noise_ratio per coordinate.
    double feature_noise_ratio = 3.5;
    LabelRule label_rule = LabelRule::per_cluster;
    std::uint64_t seed = 0;
    double train_fraction = 0.7;

    void validate() const {
        if (num_clusters == 0 || items_per_cluster == 0 || num_domains == 0) {
            throw Error("synth: cluster, per-cluster and domain counts must be positive");
        }
        if (text_dim == 0 || image_dim == 0 || narrative_dim == 0) throw Error("synth: all dims must be >= 1");
        if (!(noise_scale >= 0.0) || !(feature_noise_ratio >= 0.0)) throw Error("synth: noise must be nonnegative");
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw Error("synth: train_fraction must lie in (0,1)");
    }
};

struct SynthOutput {
    Corpus corpus;
    EmbeddingTable narratives;
    std::vector<std::size_t> cluster_of;  // per item, corpus order
    std::vector<Vec> narrative_centers;   // unit vectors, one per cluster
};

/// Label of cluster c under the per-cluster rule. Clusters come in mirrored
/// pairs (2j, 2j+1) that share a label; pairs alternate real/fake.
inline int cluster_label(std::size_t cluster) { return static_cast<int>((cluster / 2) % 2); }

namespace detail {

inline Vec random_unit(Rng& rng, std::size_t dim) {
    Vec v(dim);
    for (;;) {
        for (double& x : v) x = rng.normal();
        if (norm2(v) > 1e-12) return normalized(v);
    }
}

inline std::string format_item_id(std::size_t cluster, std::size_t member) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "c%03zu-i%04zu", cluster, member);
    return buf;
}

}  // namespace detail

/// Feature centers are mirrored within each pair (+b_j, -b_j) so that the two
/// same-label clusters cancel in any linear read-out of the features.
inline SynthOutput synth_generate(const SynthConfig& cfg) {
    cfg.validate();
    Rng center_rng(cfg.seed, "synth.centers");
    Rng item_rng(cfg.seed, "synth.items");
    Rng split_rng(cfg.seed, "synth.split");

    SynthOutput out;
    for (std::size_t c = 0; c < cfg.num_clusters; ++c) {
        out.narrative_centers.push_back(detail::random_unit(center_rng, cfg.narrative_dim));
    }
    const std::size_t num_pairs = (cfg.num_clusters + 1) / 2;
    std::vector<Vec> image_bases, text_bases;
    for (std::size_t j = 0; j < num_pairs; ++j) {
        image_bases.push_back(detail::random_unit(center_rng, cfg.image_dim));
        text_bases.push_back(detail::random_unit(center_rng, cfg.text_dim));
    }

    const double feature_noise = cfg.noise_scale * cfg.feature_noise_ratio;
    std::vector<NewsItem> items;
    for (std::size_t c = 0; c < cfg.num_clusters; ++c) {
        const double sign = (c % 2 == 0) ? 1.0 : -1.0;
        const Vec& ib = image_bases[c / 2];
        const Vec& tb = text_bases[c / 2];

        std::vector<std::size_t> order(cfg.items_per_cluster);
        for (std::size_t m = 0; m < order.size(); ++m) order[m] = m;
        split_rng.shuffle(order);
        const auto n_train = static_cast<std::size_t>(
            std::llround(cfg.train_fraction * static_cast<double>(cfg.items_per_cluster)));
        std::vector<Split> split_of(cfg.items_per_cluster, Split::test);
        for (std::size_t r = 0; r < n_train && r < order.size(); ++r) split_of[order[r]] = Split::train;

        for (std::size_t m = 0; m < cfg.items_per_cluster; ++m) {
            NewsItem it;
            it.id = detail::format_item_id(c, m);
            it.domain = "D" + std::to_string(c % cfg.num_domains + 1);
            it.image_features.resize(cfg.image_dim);
            it.text_features.resize(cfg.text_dim);
            for (std::size_t i = 0; i < cfg.image_dim; ++i) {
                it.image_features[i] = sign * ib[i] + feature_noise * item_rng.normal();
            }
            for (std::size_t i = 0; i < cfg.text_dim; ++i) {
                it.text_features[i] = sign * tb[i] + feature_noise * item_rng.normal();
            }
            Vec narrative(cfg.narrative_dim);
            for (std::size_t i = 0; i < cfg.narrative_dim; ++i) {
                narrative[i] = out.narrative_centers[c][i] + cfg.noise_scale * item_rng.normal();
            }
            if (norm2(narrative) == 0.0) narrative = out.narrative_centers[c];
            if (cfg.label_rule == LabelRule::per_cluster) {
                it.label = cluster_label(c);
            } else {
                double s = 0.0;
                for (double x : it.text_features) s += x;
                it.label = s > 0.0 ? 1 : 0;
            }
            it.split = split_of[m];
            out.narratives.emplace(it.id, normalized(narrative));
            out.cluster_of.push_back(c);
            items.push_back(std::move(it));
        }
    }
    out.corpus = Corpus(std::move(items));
    return out;
}

}  // namespace ramm

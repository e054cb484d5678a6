#pragma once
// Training loop, evaluation, ablation variants and retrieval-noise injection.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ramm/corpus.hpp"
#include "ramm/error.hpp"
#include "ramm/metrics.hpp"
#include "ramm/model.hpp"
#include "ramm/narrative.hpp"
#include "ramm/optimizer.hpp"
#include "ramm/pipeline.hpp"
#include "ramm/random.hpp"
#include "ramm/retrieval.hpp"

namespace ramm {

enum class Variant { full, no_sra, in_domain_only, feature_select, force_align, simple_loss };

inline std::string_view variant_name(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::no_sra: return "-SRA";
        case Variant::in_domain_only: return "-ANA (In-domain. only)";
        case Variant::feature_select: return "-ANA (CLIP. select)";
        case Variant::force_align: return "-CIBL (Force. Align)";
        case Variant::simple_loss: return "-CIBL (Simple. Loss)";
    }
    return "full";
}

inline std::vector<Variant> all_variants() {
    return {Variant::full,           Variant::no_sra,      Variant::in_domain_only,
            Variant::feature_select, Variant::force_align, Variant::simple_loss};
}

/// Accepts the table names ("-SRA", "-ANA (CLIP. select)", ...) and short
/// aliases ("no-sra", "clip-select", ...).
inline Variant parse_variant(std::string_view s) {
    static const std::map<std::string, Variant, std::less<>> names{
        {"full", Variant::full},
        {"-SRA", Variant::no_sra},
        {"no-sra", Variant::no_sra},
        {"-ANA (In-domain. only)", Variant::in_domain_only},
        {"in-domain-only", Variant::in_domain_only},
        {"-ANA (CLIP. select)", Variant::feature_select},
        {"clip-select", Variant::feature_select},
        {"feature-select", Variant::feature_select},
        {"-CIBL (Force. Align)", Variant::force_align},
        {"force-align", Variant::force_align},
        {"-CIBL (Simple. Loss)", Variant::simple_loss},
        {"simple-loss", Variant::simple_loss},
    };
    auto it = names.find(s);
    if (it == names.end()) throw Error("unknown variant \"" + std::string(s) + "\"");
    return it->second;
}

struct TrainConfig {
    double lr = 1e-4;
    double weight_decay = 0.01;
    std::size_t warmup_steps = 100;
    std::size_t epochs = 3;
    std::size_t max_steps = 0;  // overrides epochs when nonzero
    std::size_t batch_size = 4;
    LossWeights lambdas{0.2, 0.1, 0.2};
    std::size_t k_in = 3;
    std::size_t k_out = 2;
    double tau = 0.1;
    std::size_t latent_dim = 32;
    std::uint64_t seed = 0;
    double bce_epsilon = 1e-7;
    double noise_ratio = 0.0;
    bool noise_at_train = true;
    double threshold = 0.5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t hidden_layers = 2;
    std::size_t hidden_width = 64;
    std::size_t repr_dim = 32;
    std::size_t cibl_hidden = 64;
    double encoder_slope = 0.01;
    double attention_slope = 0.2;
    bool backprop_neighbors = false;
    Variant variant = Variant::full;

    void validate() const {
        if (!(lr > 0.0)) throw Error("lr must be positive");
        if (weight_decay < 0.0) throw Error("weight_decay must be nonnegative");
        if (batch_size < 2) throw Error("batch_size must be at least 2");
        if (lambdas.align < 0.0 || lambdas.recon < 0.0 || lambdas.compress < 0.0) throw Error("lambdas must be >= 0");
        if (k_in + k_out == 0) throw Error("k_in + k_out must be positive");
        if (!(tau > 0.0)) throw Error("tau must be positive");
        if (latent_dim == 0 || repr_dim == 0 || hidden_width == 0 || cibl_hidden == 0) {
            throw Error("model dimensions must be positive");
        }
        if (!(noise_ratio >= 0.0 && noise_ratio <= 1.0)) throw Error("noise_ratio must lie in [0,1]");
        if (!(bce_epsilon > 0.0 && bce_epsilon < 0.5)) throw Error("bce_epsilon must lie in (0, 0.5)");
    }
};

/// Settings a variant overrides.
struct VariantPlan {
    bool use_demonstration = true;
    bool feature_keys = false;
    std::size_t k_in = 3;
    std::size_t k_out = 2;
    AuxObjective objective = AuxObjective::cibl;
};

inline VariantPlan plan_for(const TrainConfig& cfg) {
    VariantPlan p{true, false, cfg.k_in, cfg.k_out, AuxObjective::cibl};
    switch (cfg.variant) {
        case Variant::full: break;
        case Variant::no_sra: p.use_demonstration = false; break;
        case Variant::in_domain_only:
            p.k_in = cfg.k_in + cfg.k_out;
            p.k_out = 0;
            break;
        case Variant::feature_select: p.feature_keys = true; break;
        case Variant::force_align: p.objective = AuxObjective::force_align; break;
        case Variant::simple_loss: p.objective = AuxObjective::simple_contrastive; break;
    }
    return p;
}

/// Replaces the first ⌊p·|ids|⌋ positions (the top-ranked ones) with
/// uniformly drawn pool items that are not the query, not among the original
/// neighbors and not already drawn.
inline std::vector<std::string> inject_retrieval_noise(std::vector<std::string> ids, double p,
                                                       const std::vector<std::string>& pool,
                                                       std::string_view query_id, Rng& rng) {
    const auto count = static_cast<std::size_t>(std::floor(p * static_cast<double>(ids.size()) + 1e-9));
    const std::vector<std::string> original = ids;
    for (std::size_t pos = 0; pos < count; ++pos) {
        std::vector<const std::string*> options;
        for (const auto& id : pool) {
            if (id == query_id) continue;
            if (std::find(original.begin(), original.end(), id) != original.end()) continue;
            if (std::find(ids.begin(), ids.end(), id) != ids.end()) continue;
            options.push_back(&id);
        }
        if (options.empty()) break;
        ids[pos] = *options[rng.index(options.size())];
    }
    return ids;
}

struct StepLog {
    std::size_t step = 0;
    double lr = 0.0;
    LossBreakdown loss;

    friend bool operator==(const StepLog&, const StepLog&) = default;
};

struct TrainResult {
    Model model;
    std::vector<StepLog> log;
    std::size_t demo_encodes = 0;
    std::size_t total_steps = 0;
};

inline ModelConfig model_config_for(const Corpus& corpus, std::size_t key_dim, const TrainConfig& cfg,
                                    const VariantPlan& plan) {
    ModelConfig mc;
    mc.feature_dim = corpus.feature_dim();
    mc.key_dim = key_dim;
    mc.hidden_layers = cfg.hidden_layers;
    mc.hidden_width = cfg.hidden_width;
    mc.repr_dim = cfg.repr_dim;
    mc.encoder_slope = cfg.encoder_slope;
    mc.attention_slope = cfg.attention_slope;
    mc.latent_dim = cfg.latent_dim;
    mc.cibl_hidden = cfg.cibl_hidden;
    mc.tau = cfg.tau;
    mc.use_demonstration = plan.use_demonstration;
    return mc;
}

/// Number of optimizer steps a config will take on `n_train` items.
inline std::size_t planned_steps(const TrainConfig& cfg, std::size_t n_train) {
    if (cfg.max_steps > 0) return cfg.max_steps;
    const std::size_t full = n_train / cfg.batch_size;
    const std::size_t per_epoch = full + ((n_train % cfg.batch_size) >= 2 ? 1 : 0);
    return per_epoch * cfg.epochs;
}

/// Everything the loop needs per train item, fixed for the whole run.
struct TrainingPlan {
    VariantPlan variant;
    std::optional<NarrativeStore> feature_store;
    const NarrativeStore* keys = nullptr;
    std::vector<std::size_t> train;  // corpus indices
    std::vector<std::string> train_ids;
    std::unordered_map<std::string, std::vector<std::string>> retrieved;
    std::unordered_map<std::string, const NewsItem*> demos;
};

inline TrainingPlan make_training_plan(const Corpus& corpus, const NarrativeStore& store, const TrainConfig& cfg) {
    TrainingPlan plan;
    plan.variant = plan_for(cfg);
    plan.train = corpus.split_indices(Split::train);
    if (plan.train.size() < 2) throw Error("training needs at least 2 train items");
    if (plan.variant.feature_keys) {
        plan.feature_store = feature_key_store(corpus);
        plan.keys = &*plan.feature_store;
    } else {
        plan.keys = &store;
    }
    for (std::size_t i : plan.train) {
        if (!plan.keys->contains(corpus[i].id)) {
            throw Error("narrative store does not cover train item \"" + corpus[i].id + "\"");
        }
        plan.train_ids.push_back(corpus[i].id);
    }
    const RetrievalIndex index(*plan.keys, corpus);
    for (std::size_t i : plan.train) {
        const NewsItem& it = corpus[i];
        plan.retrieved.emplace(it.id, index.retrieve(it.id, plan.variant.k_in, plan.variant.k_out).ids());
        if (plan.variant.use_demonstration) plan.demos.emplace(it.id, &corpus.at(sra_select(corpus, it).chosen_id));
    }
    return plan;
}

inline TrainResult train(const Corpus& corpus, const NarrativeStore& store, const TrainConfig& cfg) {
    cfg.validate();
    const TrainingPlan plan = make_training_plan(corpus, store, cfg);
    const std::size_t n_train = plan.train.size();

    TrainResult result;
    result.model = make_model(model_config_for(corpus, plan.keys->dim(), cfg, plan.variant), cfg.seed);
    result.total_steps = planned_steps(cfg, n_train);

    BatchOptions opts;
    opts.objective = plan.variant.objective;
    opts.weights = cfg.lambdas;
    opts.backprop_neighbors = cfg.backprop_neighbors;
    opts.bce_epsilon = cfg.bce_epsilon;

    AdamW optimizer(result.model, {cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.adam_eps});
    const LrSchedule schedule{cfg.lr, cfg.warmup_steps, result.total_steps};

    std::size_t step = 0;
    for (std::size_t epoch = 0; step < result.total_steps; ++epoch) {
        std::vector<std::size_t> order = plan.train;
        Rng shuffle_rng(cfg.seed, "train.shuffle", epoch);
        shuffle_rng.shuffle(order);
        for (std::size_t begin = 0; begin + 2 <= n_train && step < result.total_steps; begin += cfg.batch_size) {
            const std::size_t end = std::min(n_train, begin + cfg.batch_size);
            ++step;
            Rng eps_rng(cfg.seed, "train.eps", step);
            Rng noise_rng(cfg.seed, "train.noise", step);

            std::vector<BatchExample> batch;
            for (std::size_t b = begin; b < end; ++b) {
                const NewsItem& it = corpus[order[b]];
                BatchExample ex;
                ex.item = &it;
                if (plan.variant.use_demonstration) ex.demo = plan.demos.at(it.id);
                ex.query_key = plan.keys->embedding(it.id);
                std::vector<std::string> ids = plan.retrieved.at(it.id);
                if (cfg.noise_ratio > 0.0 && cfg.noise_at_train) {
                    ids = inject_retrieval_noise(std::move(ids), cfg.noise_ratio, plan.train_ids, it.id, noise_rng);
                }
                for (const auto& id : ids) {
                    ex.candidates.push_back(&corpus.at(id));
                    ex.candidate_keys.push_back(plan.keys->embedding(id));
                }
                ex.eps.resize(cfg.latent_dim);
                for (double& e : ex.eps) e = eps_rng.normal();
                batch.push_back(std::move(ex));
            }

            Model grad = zeros_like(result.model);
            const BatchResult br = batch_loss(result.model, batch, opts, &grad);
            result.demo_encodes += br.demo_encodes;
            const double lr = schedule.at(step);
            optimizer.step(result.model, grad, lr);
            result.log.push_back({step, lr, br.loss});
        }
    }
    return result;
}

/// Scores every item of `split`: accuracy/F1 at `threshold`, AUC by ranks.
inline EvalReport evaluate(const Model& model, const Corpus& corpus, Split split, double threshold = 0.5) {
    const auto idx = corpus.split_indices(split);
    if (idx.empty()) throw Error("cannot evaluate: split \"" + std::string(to_string(split)) + "\" is empty");
    std::vector<double> scores;
    std::vector<int> labels;
    std::vector<std::string> domains;
    std::size_t demos = 0;
    for (std::size_t i : idx) {
        const NewsItem& it = corpus[i];
        Vec h;
        if (model.config.use_demonstration) {
            const NewsItem& demo = corpus.at(sra_select(corpus, it).chosen_id);
            h = encode_with_demo(model.encoder, it, demo);
            ++demos;
        } else {
            h = encode(model.encoder, it);
        }
        scores.push_back(sigmoid(classifier_logit(model.head, h)));
        labels.push_back(it.label);
        domains.push_back(it.domain);
    }
    EvalReport r = make_report(scores, labels, domains, threshold);
    r.demonstrations_used = demos;
    return r;
}

struct AblationResult {
    Variant variant = Variant::full;
    EvalReport report;
    TrainResult training;
};

/// Trains under `variant` and evaluates on the test split.
inline AblationResult ablate(const Corpus& corpus, const NarrativeStore& store, TrainConfig cfg, Variant variant) {
    cfg.variant = variant;
    AblationResult r;
    r.variant = variant;
    r.training = train(corpus, store, cfg);
    r.report = evaluate(r.training.model, corpus, Split::test, cfg.threshold);
    return r;
}

}  // namespace ramm

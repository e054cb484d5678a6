// Acceptance harness: one PASS/FAIL line per criterion, with timings.
// Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "batch_fixture.hpp"
#include "oracles.hpp"
#include "random_corpus.hpp"
#include "ramm/gradcheck.hpp"
#include "ramm/ramm.hpp"

using namespace ramm;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int number;
    std::string name;
    double budget_s;
    std::function<Outcome()> run;
};

template <class T>
std::string fmt(T v, int prec = 4) {
    std::ostringstream ss;
    ss.precision(prec);
    ss << v;
    return ss.str();
}

// Runs f(0..n-1) on separate threads and returns results in index order.
template <class F>
auto parallel_map(std::size_t n, F f) {
    using R = decltype(f(std::size_t{0}));
    std::vector<std::future<R>> futures;
    for (std::size_t i = 0; i < n; ++i) futures.push_back(std::async(std::launch::async, f, i));
    std::vector<R> out;
    for (auto& fu : futures) out.push_back(fu.get());
    return out;
}

// ---------------------------------------------------------------- 1

Outcome gradient_fidelity() {
    constexpr std::size_t kConfigs = 12;
    std::size_t passed = 0;
    double worst = 0.0;
    std::string failures;
    for (std::size_t i = 0; i < kConfigs; ++i) {
        testing_support::FixtureOptions o;
        Rng rng(i, "acceptance.gradcheck");
        o.batch_size = 2 + rng.index(4);
        o.repr_dim = 3 + rng.index(4);
        o.latent_dim = rng.index(2) ? o.repr_dim : 2 + rng.index(6);
        o.k = 1 + rng.index(4);
        o.demos = i % 4 != 3;
        o.sample_eps = i % 5 != 4;
        BatchOptions opts;
        opts.backprop_neighbors = i % 2 == 1;
        if (o.latent_dim == o.repr_dim && i % 3 == 1) opts.objective = AuxObjective::force_align;
        if (o.latent_dim == o.repr_dim && i % 3 == 2) opts.objective = AuxObjective::simple_contrastive;
        auto fx = testing_support::make_batch_fixture(100 + i, o);
        const GradCheckReport r = grad_check_model(fx->model, fx->batch, opts, 1e-4);
        if (const GroupError* g = r.worst()) worst = std::max(worst, g->max_rel_error);
        if (r.passed && r.groups.size() >= 6) {
            ++passed;
        } else {
            for (const auto& g : r.failing_groups()) failures += " cfg" + std::to_string(i) + ":" + g;
        }
    }
    return {passed == kConfigs,
            std::to_string(passed) + "/" + std::to_string(kConfigs) + " configs, worst rel err " + fmt(worst, 3) + failures};
}

// ---------------------------------------------------------------- 2

std::vector<std::string> ids_of(const std::vector<ScoredId>& v) {
    std::vector<std::string> out;
    for (const auto& s : v) out.push_back(s.id);
    return out;
}

std::vector<std::string> ids_of(const std::vector<oracle::Hit>& v) {
    std::vector<std::string> out;
    for (const auto& s : v) out.push_back(s.id);
    return out;
}

std::string demo_or_none(const std::function<std::string()>& f) {
    try {
        return f();
    } catch (const Error&) {
        return "<none>";
    }
}

Outcome retrieval_equivalence() {
    constexpr std::uint64_t kCorpora = 1000;
    std::size_t queries = 0, ties = 0;
    for (std::uint64_t trial = 0; trial < kCorpora; ++trial) {
        const auto rc = testing_support::random_corpus(50000 + trial, 0, 0);
        Rng rng(trial, "acceptance.k");
        const std::size_t k_in = rng.index(11), k_out = rng.index(11);
        const RetrievalIndex index(rc.store, rc.corpus);
        for (const NewsItem& q : rc.corpus.items()) {
            ++queries;
            const RetrievalResult got = index.retrieve(q.id, k_in, k_out);
            const oracle::Retrieved want = oracle::retrieve(rc.store, rc.corpus, q.id, k_in, k_out);
            const RetrievalResult free_fn = homogeneous_retrieve(rc.store, rc.corpus, q.id, k_in, k_out);
            if (ids_of(got.in_domain) != ids_of(want.in) || ids_of(got.out_domain) != ids_of(want.out) ||
                ids_of(free_fn.in_domain) != ids_of(want.in) || ids_of(free_fn.out_domain) != ids_of(want.out)) {
                return {false, "retrieval mismatch, corpus " + std::to_string(trial) + " query " + q.id};
            }
            for (std::size_t i = 1; i < got.in_domain.size(); ++i) ties += got.in_domain[i].score == got.in_domain[i - 1].score;
            const std::string a = demo_or_none([&] { return sra_select(rc.corpus, q).chosen_id; });
            const std::string b = demo_or_none([&] { return oracle::select_demo(rc.corpus, q); });
            if (a != b) return {false, "demonstration mismatch, corpus " + std::to_string(trial) + " query " + q.id};
        }
    }
    return {true, std::to_string(kCorpora) + " corpora, " + std::to_string(queries) + " queries, " +
                      std::to_string(ties) + " tied neighbor pairs"};
}

// ---------------------------------------------------------------- 3

Outcome cibl_closed_forms() {
    Rng rng(3, "acceptance.kl");
    double worst = 0.0, min_kl = 1e300;
    for (int i = 0; i < 10000; ++i) {
        const std::size_t n = 1 + rng.index(16);
        LatentPosterior post{Vec(n), Vec(n)};
        for (std::size_t k = 0; k < n; ++k) {
            post.mu[k] = 3.0 * rng.normal();
            post.log_var[k] = rng.uniform(kLogVarMin, kLogVarMax);
        }
        const double got = compress_loss(post), want = oracle::kl_direct(post.mu, post.log_var);
        worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
        min_kl = std::min(min_kl, got);
    }
    const std::vector<LatentPosterior> spots{
        {{0.5}, {0.0}}, {{-1.0, 0.3}, {std::log(0.5), std::log(2.0)}}, {{0.0, 2.0, -0.7}, {1.0, -1.0, 0.2}}};
    Rng mc(4, "acceptance.mc");
    double worst_z = 0.0;
    for (const auto& post : spots) {
        double sum = 0.0, sq = 0.0;
        const std::size_t n = 1000000;
        for (std::size_t s = 0; s < n; ++s) {
            double est = 0.0;
            for (std::size_t i = 0; i < post.mu.size(); ++i) {
                const double e = mc.normal();
                const double z = post.mu[i] + std::exp(0.5 * post.log_var[i]) * e;
                est += -0.5 * e * e - 0.5 * post.log_var[i] + 0.5 * z * z;
            }
            sum += est;
            sq += est * est;
        }
        const double mean = sum / n, se = std::sqrt((sq / n - mean * mean) / n);
        worst_z = std::max(worst_z, std::abs(mean - compress_loss(post)) / se);
    }
    return {worst <= 1e-10 && min_kl >= 0.0 && worst_z <= 3.0,
            "max rel err " + fmt(worst, 3) + ", min KL " + fmt(min_kl, 3) + ", worst MC |z| " + fmt(worst_z, 3)};
}

// ---------------------------------------------------------------- 4

Outcome contrastive_sanity() {
    double worst = 0.0;
    for (std::size_t B : {2u, 4u, 8u}) {
        Rng rng(B, "acceptance.uniform");
        Vec v{rng.normal(), rng.normal(), rng.normal()};
        std::vector<Vec> a(B, v), t(B, v);
        for (auto& x : t) for (double& c : x) c *= 2.5;
        worst = std::max(worst, std::abs(align_loss(a, t, 0.1) - std::log(static_cast<double>(B))));
    }
    Rng rng(5, "acceptance.align");
    double min_loss = 1e300, worst_oracle = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t B = 2 + rng.index(15), d = 1 + rng.index(8);
        std::vector<Vec> a(B, Vec(d)), t(B, Vec(d));
        for (auto& x : a) for (double& c : x) c = rng.normal();
        for (auto& x : t) for (double& c : x) c = rng.normal();
        const double tau = rng.uniform(0.05, 2.0);
        const double l = align_loss(a, t, tau);
        min_loss = std::min(min_loss, l);
        worst_oracle = std::max(worst_oracle, std::abs(l - oracle::info_nce(a, t, tau)) / std::max(1.0, l));
    }
    return {worst <= 1e-9 && min_loss >= 0.0,
            "max |loss - log B| " + fmt(worst, 3) + ", min loss " + fmt(min_loss, 3) + ", oracle rel err " +
                fmt(worst_oracle, 3)};
}

// ---------------------------------------------------------------- 5

Outcome simplex_and_hull() {
    Rng rng(6, "acceptance.attention");
    double worst_sum = 0.0, worst_perm = 0.0, min_w = 1.0;
    std::size_t hull_violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t d = 1 + rng.index(8), key = 1 + rng.index(8), n = 1 + rng.index(10);
        const AttentionParams p = make_attention(d, key, 0.2, rng);
        Vec q(key);
        for (double& x : q) x = 3.0 * rng.normal();
        std::vector<Vec> keys(n, Vec(key)), reprs(n, Vec(d));
        for (auto& v : keys) for (double& x : v) x = rng.normal();
        for (auto& v : reprs) for (double& x : v) x = rng.normal();
        const Vec w = attention_weights(p, q, keys);
        double total = 0.0;
        for (double x : w) {
            total += x;
            min_w = std::min(min_w, x);
        }
        worst_sum = std::max(worst_sum, std::abs(total - 1.0));
        const Vec h = synthesize_positive(w, reprs);
        for (std::size_t r = 0; r < d; ++r) {
            double lo = reprs[0][r], hi = lo;
            for (const auto& v : reprs) {
                lo = std::min(lo, v[r]);
                hi = std::max(hi, v[r]);
            }
            hull_violations += h[r] < lo - 1e-12 || h[r] > hi + 1e-12;
        }
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        rng.shuffle(perm);
        std::vector<Vec> pk, pr;
        for (std::size_t i : perm) {
            pk.push_back(keys[i]);
            pr.push_back(reprs[i]);
        }
        const Vec pw = attention_weights(p, q, pk);
        for (std::size_t i = 0; i < n; ++i) worst_perm = std::max(worst_perm, std::abs(pw[i] - w[perm[i]]));
        const Vec ph = synthesize_positive(pw, pr);
        for (std::size_t r = 0; r < d; ++r) worst_perm = std::max(worst_perm, std::abs(ph[r] - h[r]));
    }
    return {worst_sum <= 1e-9 && min_w > 0.0 && hull_violations == 0 && worst_perm <= 1e-12,
            "max |sum-1| " + fmt(worst_sum, 3) + ", min weight " + fmt(min_w, 3) + ", hull violations " +
                std::to_string(hull_violations) + ", max permutation diff " + fmt(worst_perm, 3)};
}

// ---------------------------------------------------------------- 6 / 7

SynthConfig task_config(std::uint64_t seed) {
    SynthConfig sc;  // 8 clusters × 50 items
    sc.noise_scale = 0.1;
    sc.seed = seed;
    return sc;
}

TrainConfig harness_config(std::uint64_t seed) {
    TrainConfig c;
    c.seed = seed;
    c.lr = 3e-3;
    c.batch_size = 8;
    c.max_steps = 500;
    c.warmup_steps = std::min<std::size_t>(100, c.max_steps / 5);
    return c;
}

double narrative_center_oracle(const SynthOutput& s) {
    std::size_t ok = 0, n = 0;
    for (std::size_t i = 0; i < s.corpus.size(); ++i) {
        if (s.corpus[i].split != Split::test) continue;
        const Vec& e = s.narratives.at(s.corpus[i].id);
        std::size_t best = 0;
        for (std::size_t c = 1; c < s.narrative_centers.size(); ++c) {
            if (dot(e, s.narrative_centers[c]) > dot(e, s.narrative_centers[best])) best = c;
        }
        ok += cluster_label(best) == s.corpus[i].label;
        ++n;
    }
    return static_cast<double>(ok) / static_cast<double>(n);
}

/// Full-batch gradient descent on features-only logistic regression.
double logistic_baseline(const Corpus& c) {
    const std::size_t D = c.feature_dim();
    Vec w(D, 0.0);
    double b = 0.0;
    const auto train_idx = c.split_indices(Split::train);
    for (int it = 0; it < 3000; ++it) {
        Vec gw(D, 0.0);
        double gb = 0.0;
        for (std::size_t i : train_idx) {
            const Vec x = c[i].features();
            const double p = sigmoid(dot(w, x) + b);
            axpy((p - c[i].label) / train_idx.size(), x, gw);
            gb += (p - c[i].label) / train_idx.size();
        }
        axpy(-0.5, gw, w);
        b -= 0.5 * gb;
    }
    std::size_t ok = 0;
    const auto test_idx = c.split_indices(Split::test);
    for (std::size_t i : test_idx) ok += (sigmoid(dot(w, c[i].features()) + b) >= 0.5) == (c[i].label == 1);
    return static_cast<double>(ok) / static_cast<double>(test_idx.size());
}

constexpr std::size_t kSeeds = 5;

Outcome end_to_end() {
    struct SeedResult {
        double oracle, logistic, full, clip;
    };
    const auto results = parallel_map(kSeeds, [](std::size_t i) {
        const std::uint64_t seed = i + 1;
        const SynthOutput s = synth_generate(task_config(seed));
        const NarrativeStore store = build_store(s.narratives);
        const TrainConfig cfg = harness_config(seed);
        return SeedResult{narrative_center_oracle(s), logistic_baseline(s.corpus),
                          ablate(s.corpus, store, cfg, Variant::full).report.accuracy,
                          ablate(s.corpus, store, cfg, Variant::feature_select).report.accuracy};
    });
    double oracle = 1.0, logistic = 0.0, full = 0.0, margin = 0.0;
    std::string per_seed;
    for (const auto& r : results) {
        oracle = std::min(oracle, r.oracle);
        logistic = std::max(logistic, r.logistic);
        full += r.full / kSeeds;
        margin += (r.full - r.clip) / kSeeds;
        per_seed += " " + fmt(r.full, 3) + "/" + fmt(r.clip, 3);
    }
    const bool calibrated = oracle >= 0.98 && logistic <= 0.75;
    return {calibrated && full >= 0.90 && margin > 0.0,
            "calibration: narrative oracle min " + fmt(oracle, 3) + ", logistic max " + fmt(logistic, 3) +
                "; full mean acc " + fmt(full, 4) + ", mean margin over clip-select " + fmt(margin, 3) +
                " (full/clip per seed:" + per_seed + ")"};
}

Outcome noise_trend() {
    const std::vector<double> ratios{0.0, 0.2, 0.4, 0.6};
    const auto acc = parallel_map(ratios.size() * kSeeds, [&](std::size_t job) {
        const double ratio = ratios[job / kSeeds];
        const std::uint64_t seed = job % kSeeds + 1;
        const SynthOutput s = synth_generate(task_config(seed));
        const NarrativeStore store = build_store(s.narratives);
        TrainConfig cfg = harness_config(seed);
        cfg.noise_ratio = ratio;
        return ablate(s.corpus, store, cfg, Variant::full).report.accuracy;
    });
    std::vector<double> mean(ratios.size(), 0.0);
    for (std::size_t j = 0; j < acc.size(); ++j) mean[j / kSeeds] += acc[j] / kSeeds;
    bool ok = true;
    std::string detail = "mean acc by noise:";
    for (std::size_t r = 0; r < ratios.size(); ++r) {
        detail += " " + fmt(ratios[r], 2) + "->" + fmt(mean[r], 4);
        if (r > 0 && mean[r] > mean[r - 1] + 0.01) ok = false;
    }
    return {ok, detail};
}

// ---------------------------------------------------------------- 8

std::string checkpoint_bytes(const Model& m) {
    std::ostringstream out;
    write_checkpoint(out, m);
    return out.str();
}

Outcome determinism() {
    SynthConfig sc;
    sc.num_clusters = 4;
    sc.items_per_cluster = 20;
    sc.seed = 8;
    const SynthOutput s = synth_generate(sc);
    const NarrativeStore store = build_store(s.narratives);
    std::size_t checked = 0;
    for (Variant v : all_variants()) {
        TrainConfig cfg = harness_config(8);
        cfg.max_steps = 40;
        cfg.warmup_steps = 8;
        cfg.noise_ratio = 0.4;
        cfg.variant = v;
        const auto runs = parallel_map(2, [&](std::size_t) { return train(s.corpus, store, cfg); });
        if (runs[0].log != runs[1].log) return {false, "step logs differ for " + std::string(variant_name(v))};
        if (checkpoint_bytes(runs[0].model) != checkpoint_bytes(runs[1].model)) {
            return {false, "checkpoints differ for " + std::string(variant_name(v))};
        }
        ++checked;
    }
    return {true, std::to_string(checked) + " variants, logs and checkpoints bitwise identical"};
}

// ---------------------------------------------------------------- 9

Outcome metric_correctness() {
    Rng rng(9, "acceptance.auc");
    double worst = 0.0;
    std::size_t count_errors = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + rng.index(199);
        std::vector<double> s(n);
        std::vector<int> y(n);
        const bool coarse = trial % 2 == 0;
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = coarse ? static_cast<double>(rng.index(10)) / 10.0 : rng.uniform();
            y[i] = static_cast<int>(rng.index(2));
        }
        y[0] = 0;
        y[1] = 1;
        worst = std::max(worst, std::abs(*auc_mann_whitney(s, y) - oracle::auc_pairs(s, y)));

        std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool pred = s[i] >= 0.5;
            if (pred && y[i]) ++tp;
            else if (pred) ++fp;
            else if (y[i]) ++fn;
            else ++tn;
        }
        const EvalReport r = make_report(s, y, {}, 0.5);
        const double acc = static_cast<double>(tp + tn) / static_cast<double>(n);
        const double f1 = 2 * tp + fp + fn ? 2.0 * tp / static_cast<double>(2 * tp + fp + fn) : 0.0;
        count_errors += r.counts != Confusion{tp, fp, tn, fn} || r.accuracy != acc || r.f1 != f1;
    }
    return {worst <= 1e-12 && count_errors == 0,
            "500 sets, max AUC diff " + fmt(worst, 3) + ", F1/Acc mismatches " + std::to_string(count_errors)};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "gradient fidelity", 120, gradient_fidelity},
        {2, "retrieval oracle equivalence", 60, retrieval_equivalence},
        {3, "CIBL closed forms", 0, cibl_closed_forms},
        {4, "contrastive sanity", 0, contrastive_sanity},
        {5, "simplex/hull invariants", 0, simplex_and_hull},
        {6, "end-to-end learnability", 300, end_to_end},
        {7, "noise robustness trend", 0, noise_trend},
        {8, "determinism", 0, determinism},
        {9, "metric correctness", 0, metric_correctness},
    };
    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_budget = c.budget_s <= 0 || secs <= c.budget_s;
        const bool pass = o.pass && in_budget;
        failures += !pass;
        std::printf("[%s] %d %s (%.2f s%s) %s%s\n", pass ? "PASS" : "FAIL", c.number, c.name.c_str(), secs,
                    c.budget_s > 0 ? (" of " + fmt(c.budget_s, 4) + " s budget").c_str() : "", o.detail.c_str(),
                    in_budget ? "" : " [over time budget]");
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}

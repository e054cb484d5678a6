#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ramm/gradcheck.hpp"
#include "ramm/narrative_client.hpp"
#include "ramm/ramm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ramm;

namespace {

constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------- config

json config_to_json(const TrainConfig& c) {
    return {
        {"lr", c.lr},
        {"weight_decay", c.weight_decay},
        {"warmup_steps", c.warmup_steps},
        {"epochs", c.epochs},
        {"max_steps", c.max_steps},
        {"batch_size", c.batch_size},
        {"lambda1", c.lambdas.align},
        {"lambda2", c.lambdas.recon},
        {"lambda3", c.lambdas.compress},
        {"k_in", c.k_in},
        {"k_out", c.k_out},
        {"tau", c.tau},
        {"latent_dim", c.latent_dim},
        {"seed", c.seed},
        {"bce_epsilon", c.bce_epsilon},
        {"noise_ratio", c.noise_ratio},
        {"noise_at_train", c.noise_at_train},
        {"threshold", c.threshold},
        {"beta1", c.beta1},
        {"beta2", c.beta2},
        {"adam_eps", c.adam_eps},
        {"hidden_layers", c.hidden_layers},
        {"hidden_width", c.hidden_width},
        {"repr_dim", c.repr_dim},
        {"cibl_hidden", c.cibl_hidden},
        {"encoder_slope", c.encoder_slope},
        {"attention_slope", c.attention_slope},
        {"backprop_neighbors", c.backprop_neighbors},
        {"variant", std::string(variant_name(c.variant))},
    };
}

/// Applies the keys present in `j`; unknown keys are an error so typos surface.
void apply_config_json(TrainConfig& c, const json& j) {
    if (!j.is_object()) throw Error("config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
        if (key == "lr") c.lr = v.get<double>();
        else if (key == "weight_decay") c.weight_decay = v.get<double>();
        else if (key == "warmup_steps") c.warmup_steps = v.get<std::size_t>();
        else if (key == "epochs") c.epochs = v.get<std::size_t>();
        else if (key == "max_steps") c.max_steps = v.get<std::size_t>();
        else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
        else if (key == "lambda1") c.lambdas.align = v.get<double>();
        else if (key == "lambda2") c.lambdas.recon = v.get<double>();
        else if (key == "lambda3") c.lambdas.compress = v.get<double>();
        else if (key == "k_in") c.k_in = v.get<std::size_t>();
        else if (key == "k_out") c.k_out = v.get<std::size_t>();
        else if (key == "tau") c.tau = v.get<double>();
        else if (key == "latent_dim" || key == "dz") c.latent_dim = v.get<std::size_t>();
        else if (key == "seed") c.seed = v.get<std::uint64_t>();
        else if (key == "bce_epsilon") c.bce_epsilon = v.get<double>();
        else if (key == "noise_ratio") c.noise_ratio = v.get<double>();
        else if (key == "noise_at_train") c.noise_at_train = v.get<bool>();
        else if (key == "threshold") c.threshold = v.get<double>();
        else if (key == "beta1") c.beta1 = v.get<double>();
        else if (key == "beta2") c.beta2 = v.get<double>();
        else if (key == "adam_eps") c.adam_eps = v.get<double>();
        else if (key == "hidden_layers") c.hidden_layers = v.get<std::size_t>();
        else if (key == "hidden_width") c.hidden_width = v.get<std::size_t>();
        else if (key == "repr_dim") c.repr_dim = v.get<std::size_t>();
        else if (key == "cibl_hidden") c.cibl_hidden = v.get<std::size_t>();
        else if (key == "encoder_slope") c.encoder_slope = v.get<double>();
        else if (key == "attention_slope") c.attention_slope = v.get<double>();
        else if (key == "backprop_neighbors") c.backprop_neighbors = v.get<bool>();
        else if (key == "variant") c.variant = parse_variant(v.get<std::string>());
        else throw Error("unknown config key \"" + key + "\"");
    }
}

/// Flag values, set only when given on the command line.
struct Overrides {
    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> k_in, k_out, dz, steps, epochs, batch_size, warmup;
    std::optional<double> lambda1, lambda2, lambda3, tau, noise_ratio, lr;
    std::optional<std::string> variant;
    bool backprop_neighbors = false;
};

void add_train_flags(CLI::App* app, Overrides& o) {
    app->add_option("--config", o.config_path, "JSON config (or a run manifest); flags override it");
    app->add_option("--seed", o.seed, "Seed for every random component");
    app->add_option("--k-in", o.k_in, "Same-domain neighbors per query");
    app->add_option("--k-out", o.k_out, "Cross-domain neighbors per query");
    app->add_option("--lambda1", o.lambda1, "Alignment loss weight");
    app->add_option("--lambda2", o.lambda2, "Reconstruction loss weight");
    app->add_option("--lambda3", o.lambda3, "Compression loss weight");
    app->add_option("--tau", o.tau, "Contrastive temperature");
    app->add_option("--dz", o.dz, "Latent dimension");
    app->add_option("--noise-ratio", o.noise_ratio, "Fraction of retrieved neighbors replaced by random items");
    app->add_option("--variant", o.variant, "Ablation variant (full, no-sra, in-domain-only, clip-select, ...)");
    app->add_option("--steps", o.steps, "Optimizer steps (overrides epochs; 0 writes an untrained model)");
    app->add_option("--epochs", o.epochs, "Training epochs");
    app->add_option("--batch-size", o.batch_size, "Mini-batch size");
    app->add_option("--warmup", o.warmup, "Linear warmup steps");
    app->add_option("--lr", o.lr, "Peak learning rate");
    app->add_flag("--fusion-backprop-neighbors", o.backprop_neighbors,
                  "Let gradients flow through neighbor representations");
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(0, path + ": " + e.what());
    }
}

struct Resolved {
    TrainConfig cfg;
    bool untrained = false;
};

Resolved resolve(const Overrides& o) {
    Resolved r;
    TrainConfig& c = r.cfg;
    if (o.config_path) {
        const json j = read_json_file(*o.config_path);
        apply_config_json(c, j.contains("config") ? j.at("config") : j);
    }
    if (o.seed) c.seed = *o.seed;
    if (o.k_in) c.k_in = *o.k_in;
    if (o.k_out) c.k_out = *o.k_out;
    if (o.lambda1) c.lambdas.align = *o.lambda1;
    if (o.lambda2) c.lambdas.recon = *o.lambda2;
    if (o.lambda3) c.lambdas.compress = *o.lambda3;
    if (o.tau) c.tau = *o.tau;
    if (o.dz) c.latent_dim = *o.dz;
    if (o.noise_ratio) c.noise_ratio = *o.noise_ratio;
    if (o.variant) c.variant = parse_variant(*o.variant);
    if (o.epochs) c.epochs = *o.epochs;
    if (o.batch_size) c.batch_size = *o.batch_size;
    if (o.warmup) c.warmup_steps = *o.warmup;
    if (o.lr) c.lr = *o.lr;
    if (o.backprop_neighbors) c.backprop_neighbors = true;
    if (o.steps) {
        if (*o.steps == 0) r.untrained = true;
        else c.max_steps = *o.steps;
    }
    c.validate();
    return r;
}

// ---------------------------------------------------------------- files

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string hex64(std::uint64_t v) {
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << v;
    return ss.str();
}

std::string fingerprint(const std::string& path) { return "fnv1a64:" + hex64(fnv1a64(read_bytes(path))); }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir + ": " + ec.message());
    const fs::path probe = fs::path(dir) / ".ramm_write_probe";
    {
        std::ofstream out(probe);
        if (!out) throw IoError("output directory is not writable: " + dir);
    }
    fs::remove(probe, ec);
}

/// Writes via a sibling temp file and rename, so readers never see half a file.
void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << content;
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

class Manifest {
public:
    Manifest(std::string command, std::optional<std::string> dir) : dir_(std::move(dir)) {
        doc_["tool"] = "ramm";
        doc_["version"] = kToolVersion;
        doc_["command"] = std::move(command);
        doc_["artifacts"] = json::object();
        doc_["inputs"] = json::object();
        doc_["timings_ms"] = json::object();
    }

    void input(const std::string& role, const std::string& path) {
        doc_["inputs"][role] = {{"path", path}, {"fingerprint", fingerprint(path)}};
    }
    void artifact(const std::string& role, const fs::path& path) { doc_["artifacts"][role] = path.string(); }
    void set(const std::string& key, json v) { doc_[key] = std::move(v); }
    void timing(const std::string& phase, double ms) { doc_["timings_ms"][phase] = ms; }

    void write() const {
        if (dir_) write_atomic(fs::path(*dir_) / "manifest.json", doc_.dump(2) + "\n");
    }

private:
    json doc_;
    std::optional<std::string> dir_;
};

class Stopwatch {
public:
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

NarrativeStore load_store(const std::string& path, const Corpus& corpus) {
    return build_store(load_embeddings(path, peek_embedding_dim(path), &corpus));
}

// ---------------------------------------------------------------- output

json report_to_json(const EvalReport& r) {
    json per_domain = json::object();
    for (const auto& [d, m] : r.per_domain) {
        per_domain[d] = {{"accuracy", m.accuracy},
                         {"f1", m.f1},
                         {"counts", {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"tn", m.counts.tn}, {"fn", m.counts.fn}}}};
    }
    return {{"accuracy", r.accuracy},
            {"f1", r.f1},
            {"auc", r.auc ? json(*r.auc) : json(nullptr)},
            {"counts", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn}, {"fn", r.counts.fn}}},
            {"per_domain", per_domain},
            {"demonstrations_used", r.demonstrations_used}};
}

constexpr const char* kCsvMetricHeader = "accuracy,f1,auc,tp,fp,tn,fn";

std::string csv_metrics(const EvalReport& r) {
    std::ostringstream ss;
    ss << std::setprecision(6) << r.accuracy << ',' << r.f1 << ',';
    if (r.auc) ss << *r.auc;
    ss << ',' << r.counts.tp << ',' << r.counts.fp << ',' << r.counts.tn << ',' << r.counts.fn;
    return ss.str();
}

std::string step_log_jsonl(const std::vector<StepLog>& log) {
    std::string out;
    for (const StepLog& s : log) {
        out += json{{"step", s.step},
                    {"lr", s.lr},
                    {"alpha", s.loss.alpha},
                    {"align", s.loss.align},
                    {"recon", s.loss.recon},
                    {"compress", s.loss.compress},
                    {"total", s.loss.total}}
                   .dump();
        out += '\n';
    }
    return out;
}

json scored_json(const std::vector<ScoredId>& v) {
    json a = json::array();
    for (const auto& s : v) a.push_back({{"id", s.id}, {"score", s.score}});
    return a;
}

// ---------------------------------------------------------------- commands

struct SynthFlags {
    std::size_t clusters = 8, per_cluster = 50, domains = 3;
    std::size_t text_dim = 16, image_dim = 16, narrative_dim = 32;
    double noise_scale = 0.1, feature_noise_ratio = 3.5, train_fraction = 0.7;
    std::uint64_t seed = 0;
    std::string out;
    bool binary = false;
};

int cmd_synth(const SynthFlags& f) {
    Stopwatch sw;
    SynthConfig sc;
    sc.num_clusters = f.clusters;
    sc.items_per_cluster = f.per_cluster;
    sc.num_domains = f.domains;
    sc.text_dim = f.text_dim;
    sc.image_dim = f.image_dim;
    sc.narrative_dim = f.narrative_dim;
    sc.noise_scale = f.noise_scale;
    sc.feature_noise_ratio = f.feature_noise_ratio;
    sc.train_fraction = f.train_fraction;
    sc.seed = f.seed;
    sc.validate();
    ensure_dir(f.out);

    Manifest m("synth", f.out);
    m.set("config", {{"clusters", f.clusters},
                     {"per_cluster", f.per_cluster},
                     {"domains", f.domains},
                     {"text_dim", f.text_dim},
                     {"image_dim", f.image_dim},
                     {"narrative_dim", f.narrative_dim},
                     {"noise_scale", f.noise_scale},
                     {"feature_noise_ratio", f.feature_noise_ratio},
                     {"train_fraction", f.train_fraction},
                     {"seed", f.seed}});
    const fs::path corpus_path = fs::path(f.out) / "corpus.jsonl";
    const fs::path emb_path = fs::path(f.out) / (f.binary ? "narratives.bin" : "narratives.jsonl");
    m.artifact("corpus", corpus_path);
    m.artifact("embeddings", emb_path);
    m.write();

    const SynthOutput out = synth_generate(sc);
    save_corpus(corpus_path.string(), out.corpus);
    save_embeddings(emb_path.string(), out.narratives, f.binary);
    m.timing("total", sw.ms());
    m.write();
    std::cout << "wrote " << out.corpus.size() << " items to " << corpus_path.string() << "\n";
    return 0;
}

struct NarrateFlags {
    std::string corpus, out;
    std::size_t dim = 64;
    std::uint64_t seed = 0;
    bool offline = false;
    std::size_t parallelism = 4;
};

int cmd_narrate(const NarrateFlags& f) {
    Stopwatch sw;
    ensure_dir(f.out);
    NarrativeClientConfig cc = NarrativeClientConfig::from_environment();
    if (f.offline) cc.endpoint.clear();
    const NarrativeClient client(cc);
    Manifest m("narrate", f.out);
    m.input("corpus", f.corpus);
    m.set("config", {{"dim", f.dim}, {"seed", f.seed}, {"offline", client.offline()}, {"model", cc.model}});
    const fs::path text_path = fs::path(f.out) / "narratives_text.jsonl";
    const fs::path emb_path = fs::path(f.out) / "narratives.jsonl";
    m.artifact("narratives", text_path);
    m.artifact("embeddings", emb_path);
    m.write();

    const Corpus corpus = load_corpus(f.corpus);
    std::vector<const NewsItem*> items;
    for (const NewsItem& it : corpus.items()) items.push_back(&it);
    const auto narratives = extract_narratives(client, items, f.parallelism);

    std::string text;
    EmbeddingTable table;
    for (const auto& [id, narrative] : narratives) {
        text += json{{"id", id}, {"narrative", narrative}}.dump() + "\n";
        table.emplace(id, embed_narrative(narrative, f.dim, f.seed));
    }
    write_atomic(text_path, text);
    save_embeddings(emb_path.string(), table, false);
    m.timing("total", sw.ms());
    m.write();
    std::cout << "embedded " << table.size() << " narratives\n";
    return 0;
}

struct DataFlags {
    std::string corpus, embeddings;
    std::optional<std::string> out;
};

int cmd_train(const DataFlags& d, const Overrides& o) {
    Stopwatch sw;
    const Resolved r = resolve(o);
    if (!d.out) throw Error("train needs --out");
    ensure_dir(*d.out);
    Manifest m("train", d.out);
    m.input("corpus", d.corpus);
    m.input("embeddings", d.embeddings);
    m.set("config", config_to_json(r.cfg));
    m.set("untrained", r.untrained);
    const fs::path ckpt = fs::path(*d.out) / "checkpoint.bin";
    const fs::path log_path = fs::path(*d.out) / "steps.jsonl";
    m.artifact("checkpoint", ckpt);
    m.artifact("step_log", log_path);
    m.write();

    const Corpus corpus = load_corpus(d.corpus);
    const NarrativeStore store = load_store(d.embeddings, corpus);
    m.timing("load", sw.ms());

    TrainResult result;
    if (r.untrained) {
        const VariantPlan plan = plan_for(r.cfg);
        const std::size_t key_dim = plan.feature_keys ? corpus.feature_dim() : store.dim();
        result.model = make_model(model_config_for(corpus, key_dim, r.cfg, plan), r.cfg.seed);
    } else {
        result = train(corpus, store, r.cfg);
    }
    m.timing("train", sw.ms());
    save_checkpoint(ckpt.string(), result.model);
    write_atomic(log_path, step_log_jsonl(result.log));
    m.set("steps", result.log.size());
    m.timing("total", sw.ms());
    m.write();
    if (!result.log.empty()) {
        std::cout << "step " << result.log.back().step << " loss " << result.log.back().loss.total << "\n";
    }
    std::cout << "wrote " << ckpt.string() << "\n";
    return 0;
}

struct EvalFlags {
    std::string checkpoint, corpus, split = "test";
    std::optional<std::string> out;
    double threshold = 0.5;
};

int cmd_eval(const EvalFlags& f) {
    Stopwatch sw;
    const auto split = parse_split(f.split);
    if (!split) throw Error("unknown split \"" + f.split + "\" (train or test)");
    Manifest m("eval", f.out);
    if (f.out) {
        ensure_dir(*f.out);
        m.input("checkpoint", f.checkpoint);
        m.input("corpus", f.corpus);
        m.set("config", {{"split", f.split}, {"threshold", f.threshold}});
        m.artifact("report", fs::path(*f.out) / "report.json");
        m.artifact("metrics", fs::path(*f.out) / "metrics.csv");
        m.write();
    }
    const Model model = load_checkpoint(f.checkpoint);
    const Corpus corpus = load_corpus(f.corpus);
    const EvalReport report = evaluate(model, corpus, *split, f.threshold);
    const json j = report_to_json(report);
    std::cout << j.dump(2) << "\n";
    if (f.out) {
        write_atomic(fs::path(*f.out) / "report.json", j.dump(2) + "\n");
        write_atomic(fs::path(*f.out) / "metrics.csv",
                     std::string("split,") + kCsvMetricHeader + "\n" + f.split + "," + csv_metrics(report) + "\n");
        m.timing("total", sw.ms());
        m.write();
    }
    return 0;
}

struct RetrieveFlags {
    std::string corpus, embeddings, query;
    std::size_t k_in = 3, k_out = 2;
};

int cmd_retrieve(const RetrieveFlags& f) {
    const Corpus corpus = load_corpus(f.corpus);
    const NarrativeStore store = load_store(f.embeddings, corpus);
    const RetrievalResult r = homogeneous_retrieve(store, corpus, f.query, f.k_in, f.k_out);
    json j{{"query_id", r.query_id}, {"in_domain", scored_json(r.in_domain)}, {"out_domain", scored_json(r.out_domain)}};
    const NewsItem& q = corpus.at(f.query);
    try {
        const DemonstrationChoice d = sra_select(corpus, q);
        j["demonstration"] = {{"id", d.chosen_id}, {"sim_v", d.sim_v}, {"sim_t", d.sim_t}, {"score", d.score}};
    } catch (const Error&) {
        j["demonstration"] = nullptr;
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

struct GradcheckFlags {
    double tol = 1e-4;
    std::uint64_t seed = 0;
    std::size_t configs = 1;
};

/// A small random model and batch; the seed picks dimensions and objective.
GradCheckReport gradcheck_once(std::uint64_t seed, double tol, std::string& label) {
    Rng rng(seed, "gradcheck.config");
    SynthConfig sc;
    sc.num_clusters = 4;
    sc.items_per_cluster = 6;
    sc.num_domains = 2;
    sc.text_dim = 2 + rng.index(3);
    sc.image_dim = 2 + rng.index(3);
    sc.narrative_dim = 3 + rng.index(4);
    sc.seed = seed;
    const SynthOutput data = synth_generate(sc);
    const NarrativeStore store = build_store(data.narratives);
    const Corpus& c = data.corpus;

    ModelConfig mc;
    mc.feature_dim = c.feature_dim();
    mc.key_dim = store.dim();
    mc.hidden_layers = 1 + rng.index(2);
    mc.hidden_width = 4 + rng.index(5);
    mc.repr_dim = 3 + rng.index(4);
    mc.latent_dim = rng.index(2) ? mc.repr_dim : 2 + rng.index(5);
    mc.cibl_hidden = 4 + rng.index(4);
    mc.tau = rng.uniform(0.2, 1.0);
    mc.use_demonstration = rng.index(4) != 0;
    const Model model = make_model(mc, seed);

    BatchOptions opts;
    opts.backprop_neighbors = rng.index(2) != 0;
    const std::size_t pick = rng.index(4);
    if (pick == 1 && mc.latent_dim == mc.repr_dim) opts.objective = AuxObjective::force_align;
    if (pick == 2 && mc.latent_dim == mc.repr_dim) opts.objective = AuxObjective::simple_contrastive;

    const auto train_idx = c.split_indices(Split::train);
    const RetrievalIndex index(store, c);
    const std::size_t B = 2 + rng.index(3);
    std::vector<BatchExample> batch;
    for (std::size_t b = 0; b < B; ++b) {
        const NewsItem& it = c[train_idx[rng.index(train_idx.size())]];
        BatchExample ex;
        ex.item = &it;
        if (mc.use_demonstration) ex.demo = &c.at(sra_select(c, it).chosen_id);
        ex.query_key = store.embedding(it.id);
        for (const auto& id : index.retrieve(it.id, 1 + rng.index(3), rng.index(3)).ids()) {
            ex.candidates.push_back(&c.at(id));
            ex.candidate_keys.push_back(store.embedding(id));
        }
        ex.eps.resize(mc.latent_dim);
        for (double& e : ex.eps) e = rng.normal();
        batch.push_back(std::move(ex));
    }
    std::ostringstream ss;
    ss << "seed=" << seed << " B=" << B << " d=" << mc.repr_dim << " dz=" << mc.latent_dim
       << " demo=" << mc.use_demonstration << " bpn=" << opts.backprop_neighbors
       << " objective=" << static_cast<int>(opts.objective);
    label = ss.str();
    return grad_check_model(model, batch, opts, tol);
}

int cmd_gradcheck(const GradcheckFlags& f) {
    bool ok = true;
    for (std::size_t i = 0; i < f.configs; ++i) {
        std::string label;
        const GradCheckReport r = gradcheck_once(f.seed + i, f.tol, label);
        std::cout << label << "\n";
        std::cout << std::left << std::setw(18) << "group" << std::setw(14) << "max_rel_err" << std::setw(9) << "checked"
                  << std::setw(9) << "skipped" << "status\n";
        for (const GroupError& g : r.groups) {
            std::cout << std::left << std::setw(18) << g.group << std::setw(14) << std::setprecision(3)
                      << std::scientific << g.max_rel_error << std::defaultfloat << std::setw(9) << g.checked
                      << std::setw(9) << g.skipped << (g.passed ? "ok" : "FAIL") << "\n";
        }
        ok = ok && r.passed;
    }
    std::cout << (ok ? "gradient check passed" : "gradient check FAILED") << " (tol " << f.tol << ")\n";
    return ok ? 0 : 1;
}

int cmd_ablate(const DataFlags& d, const Overrides& o) {
    Stopwatch sw;
    const Resolved r = resolve(o);
    Manifest m("ablate", d.out);
    if (d.out) {
        ensure_dir(*d.out);
        m.input("corpus", d.corpus);
        m.input("embeddings", d.embeddings);
        m.set("config", config_to_json(r.cfg));
        m.artifact("metrics", fs::path(*d.out) / "ablation.csv");
        m.write();
    }
    const Corpus corpus = load_corpus(d.corpus);
    const NarrativeStore store = load_store(d.embeddings, corpus);
    const std::vector<Variant> variants = o.variant ? std::vector<Variant>{r.cfg.variant} : all_variants();
    std::string csv = std::string("variant,seed,") + kCsvMetricHeader + "\n";
    std::cout << csv;
    for (Variant v : variants) {
        const AblationResult a = ablate(corpus, store, r.cfg, v);
        const std::string row = std::string(variant_name(v)) + "," + std::to_string(r.cfg.seed) + "," +
                                csv_metrics(a.report) + "\n";
        std::cout << row << std::flush;
        csv += row;
    }
    if (d.out) {
        write_atomic(fs::path(*d.out) / "ablation.csv", csv);
        m.timing("total", sw.ms());
        m.write();
    }
    return 0;
}

struct SweepFlags {
    std::string param;
    std::vector<double> values;
};

void set_param(TrainConfig& c, const std::string& p, double v) {
    auto count = [&] {
        if (v < 0 || v != std::floor(v)) throw Error("--param " + p + " needs nonnegative integer values");
        return static_cast<std::size_t>(v);
    };
    if (p == "k_in") c.k_in = count();
    else if (p == "k_out") c.k_out = count();
    else if (p == "lambda1") c.lambdas.align = v;
    else if (p == "lambda2") c.lambdas.recon = v;
    else if (p == "lambda3") c.lambdas.compress = v;
    else if (p == "tau") c.tau = v;
    else if (p == "dz") c.latent_dim = count();
    else if (p == "noise_ratio") c.noise_ratio = v;
    else throw Error("unknown sweep parameter \"" + p + "\" (k_in, k_out, lambda1, lambda2, lambda3, tau, dz, noise_ratio)");
}

int cmd_sweep(const DataFlags& d, const Overrides& o, const SweepFlags& s) {
    Stopwatch sw;
    const Resolved r = resolve(o);
    for (double v : s.values) {
        TrainConfig probe = r.cfg;
        set_param(probe, s.param, v);
        probe.validate();
    }
    Manifest m("sweep", d.out);
    if (d.out) {
        ensure_dir(*d.out);
        m.input("corpus", d.corpus);
        m.input("embeddings", d.embeddings);
        m.set("config", config_to_json(r.cfg));
        m.set("sweep", {{"param", s.param}, {"values", s.values}});
        m.artifact("metrics", fs::path(*d.out) / "sweep.csv");
        m.write();
    }
    const Corpus corpus = load_corpus(d.corpus);
    const NarrativeStore store = load_store(d.embeddings, corpus);
    std::string csv = std::string("param,value,") + kCsvMetricHeader + "\n";
    std::cout << csv;
    for (double v : s.values) {
        TrainConfig c = r.cfg;
        set_param(c, s.param, v);
        const AblationResult a = ablate(corpus, store, c, c.variant);
        std::ostringstream row;
        row << s.param << ',' << v << ',' << csv_metrics(a.report) << '\n';
        std::cout << row.str() << std::flush;
        csv += row.str();
    }
    if (d.out) {
        write_atomic(fs::path(*d.out) / "sweep.csv", csv);
        m.timing("total", sw.ms());
        m.write();
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ramm: retrieval-augmented multimodal fake-news detection at desk scale"};
    app.require_subcommand(1);

    SynthFlags synth_f;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic narrative-cluster corpus");
    synth->add_option("--clusters", synth_f.clusters, "Narrative clusters")->capture_default_str();
    synth->add_option("--per-cluster", synth_f.per_cluster, "Items per cluster")->capture_default_str();
    synth->add_option("--domains", synth_f.domains, "Number of domains")->capture_default_str();
    synth->add_option("--text-dim", synth_f.text_dim)->capture_default_str();
    synth->add_option("--image-dim", synth_f.image_dim)->capture_default_str();
    synth->add_option("--narrative-dim", synth_f.narrative_dim)->capture_default_str();
    synth->add_option("--noise-scale", synth_f.noise_scale)->capture_default_str();
    synth->add_option("--feature-noise-ratio", synth_f.feature_noise_ratio)->capture_default_str();
    synth->add_option("--train-fraction", synth_f.train_fraction)->capture_default_str();
    synth->add_option("--seed", synth_f.seed)->capture_default_str();
    synth->add_option("--out", synth_f.out, "Output directory")->required();
    synth->add_flag("--binary", synth_f.binary, "Write embeddings in the binary format");

    NarrateFlags narrate_f;
    auto* narrate = app.add_subcommand("narrate", "Extract and embed one narrative per item");
    narrate->add_option("--corpus", narrate_f.corpus)->required();
    narrate->add_option("--out", narrate_f.out)->required();
    narrate->add_option("--dim", narrate_f.dim, "Embedding dimension")->capture_default_str();
    narrate->add_option("--seed", narrate_f.seed)->capture_default_str();
    narrate->add_option("--parallelism", narrate_f.parallelism)->capture_default_str();
    narrate->add_flag("--offline", narrate_f.offline, "Use each item's narrative_text instead of the endpoint");

    Overrides overrides;
    DataFlags data_f;
    auto add_data = [&](CLI::App* c, bool out_required) {
        c->add_option("--corpus", data_f.corpus)->required();
        c->add_option("--embeddings,--narratives", data_f.embeddings, "Narrative embedding table")->required();
        auto* out = c->add_option("--out", data_f.out, "Output directory");
        if (out_required) out->required();
        add_train_flags(c, overrides);
    };
    auto* train_c = app.add_subcommand("train", "Train a model and write a checkpoint and step log");
    add_data(train_c, true);
    auto* ablate_c = app.add_subcommand("ablate", "Train and evaluate ablation variants");
    add_data(ablate_c, false);
    SweepFlags sweep_f;
    auto* sweep_c = app.add_subcommand("sweep", "Train and evaluate over a grid of one hyperparameter");
    add_data(sweep_c, false);
    sweep_c->add_option("--param", sweep_f.param, "k_in, k_out, lambda1, lambda2, lambda3, tau, dz or noise_ratio")
        ->required();
    sweep_c->add_option("--values", sweep_f.values, "Comma-separated grid")->delimiter(',')->required();

    EvalFlags eval_f;
    auto* eval_c = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
    eval_c->add_option("--checkpoint", eval_f.checkpoint)->required();
    eval_c->add_option("--corpus", eval_f.corpus)->required();
    eval_c->add_option("--split", eval_f.split)->capture_default_str();
    eval_c->add_option("--threshold", eval_f.threshold)->capture_default_str();
    eval_c->add_option("--out", eval_f.out, "Directory for report.json and metrics.csv");

    RetrieveFlags retrieve_f;
    auto* retrieve_c = app.add_subcommand("retrieve", "Show the homogeneous set and demonstration for one item");
    retrieve_c->add_option("--corpus", retrieve_f.corpus)->required();
    retrieve_c->add_option("--embeddings,--narratives", retrieve_f.embeddings)->required();
    retrieve_c->add_option("--query", retrieve_f.query)->required();
    retrieve_c->add_option("--k-in", retrieve_f.k_in)->capture_default_str();
    retrieve_c->add_option("--k-out", retrieve_f.k_out)->capture_default_str();

    GradcheckFlags grad_f;
    auto* grad_c = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
    grad_c->add_option("--tol", grad_f.tol)->capture_default_str();
    grad_c->add_option("--seed", grad_f.seed)->capture_default_str();
    grad_c->add_option("--configs", grad_f.configs, "Random configurations to check")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) return cmd_synth(synth_f);
        if (*narrate) return cmd_narrate(narrate_f);
        if (*train_c) return cmd_train(data_f, overrides);
        if (*ablate_c) return cmd_ablate(data_f, overrides);
        if (*sweep_c) return cmd_sweep(data_f, overrides, sweep_f);
        if (*eval_c) return cmd_eval(eval_f);
        if (*retrieve_c) return cmd_retrieve(retrieve_f);
        if (*grad_c) return cmd_gradcheck(grad_f);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

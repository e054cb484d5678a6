#pragma once
// All trainable parameters of the pipeline, named parameter traversal and the
// checkpoint container.
//
// Checkpoint layout, little-endian:
//   "RAMMCKPT" | u32 version | u32 tensor_count |
//   tensor_count × (u16 name_len | name | u32 rank | rank × u64 dim | Π dims × f64)
// Architecture settings are stored as rank-1 "config.*" tensors.

#include <array>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ramm/cibl.hpp"
#include "ramm/embeddings.hpp"
#include "ramm/encoder.hpp"
#include "ramm/error.hpp"
#include "ramm/fusion.hpp"
#include "ramm/random.hpp"

namespace ramm {

struct ModelConfig {
    std::size_t feature_dim = 0;  // d_v + d_t
    std::size_t key_dim = 0;      // narrative (or feature-key) embedding size
    std::size_t hidden_layers = 2;
    std::size_t hidden_width = 64;
    std::size_t repr_dim = 32;
    double encoder_slope = 0.01;
    double attention_slope = 0.2;
    std::size_t latent_dim = 32;
    std::size_t cibl_hidden = 64;
    double tau = 0.1;
    bool use_demonstration = true;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Model {
    ModelConfig config;
    EncoderParams encoder;
    ClassifierHead head;
    AttentionParams attention;
    CiblParams cibl;

    friend bool operator==(const Model&, const Model&) = default;
};

inline Model make_model(const ModelConfig& cfg, std::uint64_t seed) {
    if (cfg.feature_dim == 0 || cfg.key_dim == 0 || cfg.repr_dim == 0 || cfg.latent_dim == 0) {
        throw DimensionError("model dimensions must be positive");
    }
    Model m;
    m.config = cfg;
    Rng enc_rng(seed, "model.encoder");
    m.encoder = make_encoder(cfg.feature_dim, cfg.hidden_layers, cfg.hidden_width, cfg.repr_dim, cfg.encoder_slope,
                             enc_rng);
    Rng head_rng(seed, "model.head");
    const double hb = 1.0 / std::sqrt(static_cast<double>(cfg.repr_dim));
    m.head.weight.resize(cfg.repr_dim);
    for (double& w : m.head.weight) w = head_rng.uniform(-hb, hb);
    m.head.bias = head_rng.uniform(-hb, hb);
    Rng att_rng(seed, "model.attention");
    m.attention = make_attention(cfg.repr_dim, cfg.key_dim, cfg.attention_slope, att_rng);
    Rng cibl_rng(seed, "model.cibl");
    m.cibl = make_cibl(cfg.repr_dim, cfg.latent_dim, cfg.cibl_hidden, cfg.encoder_slope, cfg.tau, cibl_rng);
    return m;
}

/// Same shapes, all parameters zero. Used as a gradient accumulator.
inline Model zeros_like(const Model& m) {
    Model z;
    z.config = m.config;
    z.encoder = {zeros_like(m.encoder.net), m.encoder.feature_dim};
    z.head = {Vec(m.head.weight.size(), 0.0), 0.0};
    z.attention = zeros_like(m.attention);
    z.cibl = zeros_like(m.cibl);
    return z;
}

struct ParamView {
    std::string name;
    std::span<double> values;
    std::vector<std::size_t> shape;
};

namespace detail {

inline void visit_mlp(Mlp& mlp, const std::string& prefix, const std::function<void(ParamView)>& f) {
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        Dense& d = mlp.layers[l];
        const std::string base = prefix + ".layer" + std::to_string(l);
        f({base + ".weight", d.weight.data, {d.weight.rows, d.weight.cols}});
        f({base + ".bias", d.bias, {d.bias.size()}});
    }
}

}  // namespace detail

/// Visits every trainable tensor in a fixed order.
inline void for_each_param(Model& m, const std::function<void(ParamView)>& f) {
    detail::visit_mlp(m.encoder.net, "encoder", f);
    f({"head.weight", m.head.weight, {m.head.weight.size()}});
    f({"head.bias", std::span<double>(&m.head.bias, 1), {1}});
    f({"attention.adapter", m.attention.adapter.data, {m.attention.adapter.rows, m.attention.adapter.cols}});
    f({"attention.score", m.attention.score, {m.attention.score.size()}});
    detail::visit_mlp(m.cibl.f_mu, "cibl.f_mu", f);
    detail::visit_mlp(m.cibl.f_sigma, "cibl.f_sigma", f);
    detail::visit_mlp(m.cibl.g_psi, "cibl.g_psi", f);
    if (m.cibl.has_projection()) {
        f({"cibl.projection", m.cibl.projection.data, {m.cibl.projection.rows, m.cibl.projection.cols}});
    }
}

inline std::vector<ParamView> parameters(Model& m) {
    std::vector<ParamView> out;
    for_each_param(m, [&](ParamView v) { out.push_back(std::move(v)); });
    return out;
}

/// Coarse grouping used in reports: "encoder", "head", "attention",
/// "cibl.f_mu", "cibl.f_sigma", "cibl.g_psi", "cibl.projection".
inline std::string param_group(const std::string& name) {
    const auto first = name.find('.');
    if (name.compare(0, first, "cibl") != 0) return name.substr(0, first);
    const auto second = name.find('.', first + 1);
    return name.substr(0, second);
}

inline std::size_t parameter_count(Model& m) {
    std::size_t n = 0;
    for_each_param(m, [&](ParamView v) { n += v.values.size(); });
    return n;
}

inline constexpr std::array<char, 8> kCheckpointMagic{'R', 'A', 'M', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;
};

inline std::vector<std::pair<std::string, Tensor>> config_tensors(const ModelConfig& c) {
    auto scalar = [](double v) { return Tensor{{1}, {v}}; };
    return {
        {"config.feature_dim", scalar(static_cast<double>(c.feature_dim))},
        {"config.key_dim", scalar(static_cast<double>(c.key_dim))},
        {"config.hidden_layers", scalar(static_cast<double>(c.hidden_layers))},
        {"config.hidden_width", scalar(static_cast<double>(c.hidden_width))},
        {"config.repr_dim", scalar(static_cast<double>(c.repr_dim))},
        {"config.encoder_slope", scalar(c.encoder_slope)},
        {"config.attention_slope", scalar(c.attention_slope)},
        {"config.latent_dim", scalar(static_cast<double>(c.latent_dim))},
        {"config.cibl_hidden", scalar(static_cast<double>(c.cibl_hidden))},
        {"config.tau", scalar(c.tau)},
        {"config.use_demonstration", scalar(c.use_demonstration ? 1.0 : 0.0)},
    };
}

inline void write_tensor(std::ostream& out, const std::string& name, std::span<const std::size_t> shape,
                         std::span<const double> data) {
    write_le(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_le(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) write_le(out, static_cast<std::uint64_t>(d));
    for (double x : data) write_f64(out, x);
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Model& model) {
    Model m = model;
    const auto cfg = detail::config_tensors(m.config);
    const std::size_t count = cfg.size() + parameters(m).size();
    out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
    detail::write_le(out, kCheckpointVersion);
    detail::write_le(out, static_cast<std::uint32_t>(count));
    for (const auto& [name, t] : cfg) detail::write_tensor(out, name, t.shape, t.data);
    for_each_param(m, [&](ParamView v) { detail::write_tensor(out, v.name, v.shape, v.values); });
}

inline Model read_checkpoint(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kCheckpointMagic) throw IoError("not a checkpoint (bad magic)");
    const auto version = detail::read_le<std::uint32_t>(in);
    if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
    const auto count = detail::read_le<std::uint32_t>(in);
    std::map<std::string, detail::Tensor> tensors;
    for (std::uint32_t t = 0; t < count; ++t) {
        const auto len = detail::read_le<std::uint16_t>(in);
        std::string name(len, '\0');
        in.read(name.data(), len);
        const auto rank = detail::read_le<std::uint32_t>(in);
        detail::Tensor tensor;
        std::size_t n = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            tensor.shape.push_back(static_cast<std::size_t>(detail::read_le<std::uint64_t>(in)));
            n *= tensor.shape.back();
        }
        if (n > (std::size_t{1} << 32)) throw IoError("checkpoint tensor \"" + name + "\" is implausibly large");
        tensor.data.resize(n);
        for (double& x : tensor.data) x = detail::read_f64(in);
        if (!in) throw IoError("truncated checkpoint");
        tensors.emplace(std::move(name), std::move(tensor));
    }

    auto scalar = [&](const std::string& name) {
        auto it = tensors.find(name);
        if (it == tensors.end() || it->second.data.size() != 1) throw IoError("checkpoint lacks " + name);
        return it->second.data[0];
    };
    auto count_of = [&](const std::string& name) { return static_cast<std::size_t>(scalar(name)); };
    ModelConfig cfg;
    cfg.feature_dim = count_of("config.feature_dim");
    cfg.key_dim = count_of("config.key_dim");
    cfg.hidden_layers = count_of("config.hidden_layers");
    cfg.hidden_width = count_of("config.hidden_width");
    cfg.repr_dim = count_of("config.repr_dim");
    cfg.encoder_slope = scalar("config.encoder_slope");
    cfg.attention_slope = scalar("config.attention_slope");
    cfg.latent_dim = count_of("config.latent_dim");
    cfg.cibl_hidden = count_of("config.cibl_hidden");
    cfg.tau = scalar("config.tau");
    cfg.use_demonstration = scalar("config.use_demonstration") != 0.0;

    Model m = make_model(cfg, 0);
    for_each_param(m, [&](ParamView v) {
        auto it = tensors.find(v.name);
        if (it == tensors.end()) throw IoError("checkpoint lacks tensor " + v.name);
        if (it->second.shape != v.shape) throw IoError("checkpoint tensor " + v.name + " has the wrong shape");
        std::copy(it->second.data.begin(), it->second.data.end(), v.values.begin());
    });
    return m;
}

inline void save_checkpoint(const std::string& path, const Model& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path);
    write_checkpoint(out, model);
    if (!out) throw IoError("write failed for " + path);
}

inline Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    return read_checkpoint(in);
}

}  // namespace ramm

#pragma once
// Trainable stand-in for the multimodal backbone: an MLP over the
// concatenation [demonstration features ‖ item features]. The plain entry
// point fills the demonstration slot with zeros, so both entry points share
// every parameter.

#include <algorithm>
#include <string>

#include "ramm/corpus.hpp"
#include "ramm/linalg.hpp"
#include "ramm/mlp.hpp"

namespace ramm {

struct EncoderParams {
    Mlp net;                    // 2 * feature_dim -> repr_dim
    std::size_t feature_dim = 0;  // d_v + d_t

    std::size_t repr_dim() const { return net.output_dim(); }

    friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

inline EncoderParams make_encoder(std::size_t feature_dim, std::size_t hidden_layers, std::size_t width,
                                  std::size_t repr_dim, double slope, Rng& rng) {
    std::vector<std::size_t> sizes{2 * feature_dim};
    for (std::size_t l = 0; l < hidden_layers; ++l) sizes.push_back(width);
    sizes.push_back(repr_dim);
    return {make_mlp(sizes, slope, rng), feature_dim};
}

inline void check_item_dims(const EncoderParams& p, const NewsItem& item) {
    const std::size_t d = item.image_features.size() + item.text_features.size();
    if (d != p.feature_dim) {
        throw DimensionError("item \"" + item.id + "\" has " + std::to_string(d) +
                             " feature entries, encoder expects " + std::to_string(p.feature_dim));
    }
}

/// [0 ‖ image ‖ text]
inline Vec plain_input(const EncoderParams& p, const NewsItem& item) {
    check_item_dims(p, item);
    Vec x(p.feature_dim, 0.0);
    x.insert(x.end(), item.image_features.begin(), item.image_features.end());
    x.insert(x.end(), item.text_features.begin(), item.text_features.end());
    return x;
}

/// [demo image ‖ demo text ‖ image ‖ text]
inline Vec demo_input(const EncoderParams& p, const NewsItem& item, const NewsItem& demo) {
    check_item_dims(p, item);
    check_item_dims(p, demo);
    Vec x;
    x.reserve(2 * p.feature_dim);
    x.insert(x.end(), demo.image_features.begin(), demo.image_features.end());
    x.insert(x.end(), demo.text_features.begin(), demo.text_features.end());
    x.insert(x.end(), item.image_features.begin(), item.image_features.end());
    x.insert(x.end(), item.text_features.begin(), item.text_features.end());
    return x;
}

inline Vec encode(const EncoderParams& p, const NewsItem& item, MlpTrace* trace = nullptr,
                  RegimeRecorder* regime = nullptr) {
    return mlp_forward(p.net, plain_input(p, item), trace, regime);
}

inline Vec encode_with_demo(const EncoderParams& p, const NewsItem& item, const NewsItem& demo,
                            MlpTrace* trace = nullptr, RegimeRecorder* regime = nullptr) {
    return mlp_forward(p.net, demo_input(p, item, demo), trace, regime);
}

struct ClassifierHead {
    Vec weight;
    double bias = 0.0;

    friend bool operator==(const ClassifierHead&, const ClassifierHead&) = default;
};

inline double classifier_logit(const ClassifierHead& head, std::span<const double> h) {
    return dot(head.weight, h) + head.bias;
}

/// sigmoid(w·h + b) clamped into [eps, 1 - eps].
inline double classify(const ClassifierHead& head, std::span<const double> h, double eps = 1e-7) {
    return std::clamp(sigmoid(classifier_logit(head, h)), eps, 1.0 - eps);
}

}  // namespace ramm

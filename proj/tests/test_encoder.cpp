#include <gtest/gtest.h>

#include "ramm/encoder.hpp"

using namespace ramm;

namespace {

NewsItem item(Vec image, Vec text, std::string id = "x") {
    NewsItem it;
    it.id = std::move(id);
    it.domain = "d";
    it.image_features = std::move(image);
    it.text_features = std::move(text);
    return it;
}

/// Textbook forward pass with explicit loops, no library helpers.
Vec reference_forward(const Mlp& m, Vec x) {
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const Dense& d = m.layers[l];
        Vec y(d.weight.rows);
        for (std::size_t r = 0; r < d.weight.rows; ++r) {
            double s = d.bias[r];
            for (std::size_t c = 0; c < d.weight.cols; ++c) s += d.weight.data[r * d.weight.cols + c] * x[c];
            if (l + 1 < m.layers.size() && s < 0.0) s *= m.slope;
            y[r] = s;
        }
        x = std::move(y);
    }
    return x;
}

}  // namespace

TEST(Encoder, ZeroFinalLayerGivesItsBias) {
    Rng rng(1);
    EncoderParams p = make_encoder(4, 2, 8, 3, 0.01, rng);
    Dense& last = p.net.layers.back();
    std::fill(last.weight.data.begin(), last.weight.data.end(), 0.0);
    last.bias = {0.5, -1.0, 2.0};
    for (const NewsItem& it : {item({1, 2}, {3, 4}), item({-5, 0}, {0.1, 9})}) {
        EXPECT_EQ(encode(p, it), last.bias);
        EXPECT_EQ(encode_with_demo(p, it, it), last.bias);
    }
}

TEST(Encoder, IdentityLayerReproducesInput) {
    // One square layer, W = I, b = 0: h equals the encoder input, whose item
    // half is [image ‖ text] behind a zero demonstration slot.
    EncoderParams p;
    p.feature_dim = 3;
    p.net.layers.push_back({Matrix(6, 6), Vec(6, 0.0)});
    for (std::size_t i = 0; i < 6; ++i) p.net.layers[0].weight(i, i) = 1.0;
    const NewsItem it = item({0.5, 1.5}, {2.5});
    EXPECT_EQ(encode(p, it), (Vec{0, 0, 0, 0.5, 1.5, 2.5}));
    const NewsItem demo = item({7, 8}, {9}, "demo");
    EXPECT_EQ(encode_with_demo(p, it, demo), (Vec{7, 8, 9, 0.5, 1.5, 2.5}));
}

TEST(Encoder, MatchesIndependentForwardPass) {
    Rng rng(2);
    const EncoderParams p = make_encoder(5, 2, 16, 4, 0.01, rng);
    const NewsItem a = item({0.3, -1.2, 0.7}, {2.0, -0.4}, "a");
    const NewsItem b = item({-0.9, 0.1, 1.1}, {-1.5, 0.8}, "b");
    auto near = [](const Vec& x, const Vec& y) {
        ASSERT_EQ(x.size(), y.size());
        for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], y[i], 1e-13);
    };
    near(encode(p, a), reference_forward(p.net, {0, 0, 0, 0, 0, 0.3, -1.2, 0.7, 2.0, -0.4}));
    near(encode_with_demo(p, a, b), reference_forward(p.net, {-0.9, 0.1, 1.1, -1.5, 0.8, 0.3, -1.2, 0.7, 2.0, -0.4}));
    EXPECT_EQ(encode(p, a), encode(p, a));
}

TEST(Encoder, RejectsDimensionMismatch) {
    Rng rng(3);
    const EncoderParams p = make_encoder(4, 1, 8, 2, 0.01, rng);
    EXPECT_THROW(encode(p, item({1, 2, 3}, {4, 5})), DimensionError);
    EXPECT_THROW(encode_with_demo(p, item({1, 2}, {3, 4}), item({1}, {2})), DimensionError);
}

TEST(Encoder, ReportsNonFiniteLayer) {
    Rng rng(4);
    EncoderParams p = make_encoder(2, 2, 4, 2, 0.01, rng);
    p.net.layers[1].bias[0] = std::numeric_limits<double>::infinity();
    try {
        encode(p, item({1}, {1}));
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos);
    }
}

TEST(Encoder, InitIsSeededAndFanInScaled) {
    Rng r1(9), r2(9);
    const EncoderParams a = make_encoder(10, 2, 32, 8, 0.01, r1);
    const EncoderParams b = make_encoder(10, 2, 32, 8, 0.01, r2);
    EXPECT_EQ(a, b);
    for (const Dense& d : a.net.layers) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(d.input_dim()));
        for (double w : d.weight.data) EXPECT_LE(std::abs(w), bound);
    }
}

TEST(Classify, KnownValues) {
    ClassifierHead zero{Vec(3, 0.0), 0.0};
    EXPECT_DOUBLE_EQ(classify(zero, Vec{5, -2, 1}), 0.5);

    ClassifierHead unit{Vec{1, 0, 0}, 0.0};
    EXPECT_NEAR(classify(unit, Vec{2, 0, 0}), 0.8807971, 1e-7);

    EXPECT_DOUBLE_EQ(classify(unit, Vec{1e4, 0, 0}), 1.0 - 1e-7);
    EXPECT_DOUBLE_EQ(classify(unit, Vec{-1e4, 0, 0}), 1e-7);
    EXPECT_THROW(classify(unit, Vec{1, 2}), DimensionError);
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
    Rng rng(5);
    Mlp m = make_mlp({6, 9, 7, 3}, 0.01, rng);
    const Vec x{0.3, -0.7, 1.1, 0.05, -2.0, 0.6};
    const Vec c{0.4, -1.0, 0.25};  // loss = c · f(x)
    MlpTrace trace;
    mlp_forward(m, x, &trace);
    Mlp grad = zeros_like(m);
    const Vec dx = mlp_backward(m, trace, c, &grad);

    auto loss = [&](const Mlp& net, const Vec& in) { return dot(c, mlp_forward(net, in)); };
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        for (std::size_t k = 0; k < m.layers[l].weight.data.size(); ++k) {
            Mlp p = m, q = m;
            p.layers[l].weight.data[k] += 1e-6;
            q.layers[l].weight.data[k] -= 1e-6;
            EXPECT_NEAR(grad.layers[l].weight.data[k], (loss(p, x) - loss(q, x)) / 2e-6, 1e-7);
        }
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        Vec p = x, q = x;
        p[i] += 1e-6;
        q[i] -= 1e-6;
        EXPECT_NEAR(dx[i], (loss(m, p) - loss(m, q)) / 2e-6, 1e-7);
    }
}

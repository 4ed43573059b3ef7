#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pcreg/context.hpp"
#include "pcreg/feature_cloud.hpp"
#include "pcreg/kdtree.hpp"
#include "pcreg/rng.hpp"

namespace pcreg {

struct LayerShape {
    int in = 0;
    int out = 0;
    bool operator==(const LayerShape&) const = default;
};

/**
 * Flat parameter vector for a per-point MLP, laid out layer by layer as the
 * row-major weight matrix followed by the bias. Reconstructible bit-exactly
 * from (seed, shapes) via random_init.
 */
struct EncoderParams {
    std::vector<LayerShape> shapes;
    Eigen::VectorXd values;
    std::uint64_t seed = 0;

    int input_dim() const { return shapes.empty() ? 0 : shapes.front().in; }
    int output_dim() const { return shapes.empty() ? 0 : shapes.back().out; }

    static int count_for(const std::vector<LayerShape>& shapes) {
        int n = 0;
        for (const auto& s : shapes) n += s.out * s.in + s.out;
        return n;
    }

    /// Offset of layer l's weight block; its bias follows at w + out*in.
    int layer_offset(int layer) const {
        int off = 0;
        for (int l = 0; l < layer; ++l)
            off += shapes[static_cast<std::size_t>(l)].out *
                       shapes[static_cast<std::size_t>(l)].in +
                   shapes[static_cast<std::size_t>(l)].out;
        return off;
    }

    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
    weight(int layer) const {
        const auto& s = shapes[static_cast<std::size_t>(layer)];
        return {values.data() + layer_offset(layer), s.out, s.in};
    }

    Eigen::Map<const Eigen::VectorXd> bias(int layer) const {
        const auto& s = shapes[static_cast<std::size_t>(layer)];
        return {values.data() + layer_offset(layer) + s.out * s.in, s.out};
    }

    void validate() const {
        if (values.size() != count_for(shapes))
            throw std::invalid_argument("encoder params: value count does not match shapes");
        for (std::size_t l = 1; l < shapes.size(); ++l) {
            if (shapes[l].in != shapes[l - 1].out)
                throw std::invalid_argument("encoder params: layer shapes do not chain");
        }
    }
};

/// Hidden widths of the per-point feature encoders; the final width is the
/// feature dimension.
inline std::vector<LayerShape> encoder_shapes(int context_dim, int feature_dim = 32) {
    return {{context_dim, 64}, {64, 64}, {64, feature_dim}};
}

/// Two-layer projection head operating in feature space.
inline std::vector<LayerShape> head_shapes(int feature_dim = 32) {
    return {{feature_dim, feature_dim}, {feature_dim, feature_dim}};
}

/**
 * He-style initialization: weights drawn N(0, 2/fan_in), biases zero. Every
 * draw comes from a counter stream keyed by (seed, layer), so the result is
 * a pure function of (seed, shapes).
 */
inline EncoderParams random_init(std::uint64_t seed, const std::vector<LayerShape>& shapes) {
    EncoderParams p;
    p.shapes = shapes;
    p.seed = seed;
    p.values.resize(EncoderParams::count_for(shapes));
    CounterRng root = CounterRng(seed).fork("encoder_init");
    int off = 0;
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        CounterRng layer_rng = root.fork(static_cast<std::uint64_t>(l));
        const double sigma = std::sqrt(2.0 / static_cast<double>(shapes[l].in));
        const int n_w = shapes[l].out * shapes[l].in;
        for (int i = 0; i < n_w; ++i) p.values[off + i] = layer_rng.normal(0.0, sigma);
        for (int i = 0; i < shapes[l].out; ++i) p.values[off + n_w + i] = 0.0;
        off += n_w + shapes[l].out;
    }
    return p;
}

namespace detail {

/// Shared by the plain forward pass and the recorded (differentiable) one:
/// both must produce bit-identical values, so the arithmetic lives here.
inline Eigen::VectorXd affine_forward(const EncoderParams& p, int layer,
                                      const Eigen::VectorXd& x) {
    return p.weight(layer) * x + p.bias(layer);
}

inline Eigen::VectorXd relu(Eigen::VectorXd v) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (v[i] < 0.0) v[i] = 0.0;
    return v;
}

/// L2 normalization with normalize(0) = 0.
inline Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v) {
    const double n = v.norm();
    return n > 0.0 ? Eigen::VectorXd(v / n) : v;
}

}  // namespace detail

/// Forward pass for one context: ReLU between layers, none after the last,
/// then L2 normalization.
inline Eigen::VectorXd encode_one(const EncoderParams& p, const Eigen::VectorXd& context) {
    if (context.size() != p.input_dim())
        throw std::invalid_argument("encode: context dimension does not match input layer");
    Eigen::VectorXd h = context;
    for (std::size_t l = 0; l < p.shapes.size(); ++l) {
        h = detail::affine_forward(p, static_cast<int>(l), h);
        if (l + 1 < p.shapes.size()) h = detail::relu(std::move(h));
    }
    return detail::l2_normalize(h);
}

/// Encodes every context row; rows of the result are unit features (or zero).
inline FeatureCloud encode(const EncoderParams& p, const PointMatrix& contexts) {
    FeatureCloud out;
    out.features.resize(contexts.rows(), p.output_dim());
    for (Eigen::Index i = 0; i < contexts.rows(); ++i)
        out.features.row(i) = encode_one(p, contexts.row(i).transpose()).transpose();
    return out;
}

/// Context build plus encoding, keeping the source cloud alongside the
/// features so downstream matching can reference positions by row.
inline FeatureCloud featurize(const PointCloud& cloud, const EncoderParams& p,
                              Modality modality, int k = 16) {
    FeatureCloud out = encode(p, build_context(cloud, modality, k));
    out.cloud = cloud;
    out.modality = modality;
    out.validate();
    return out;
}

/// The projection head is the same MLP machinery at feature dimension.
inline Eigen::VectorXd project_head(const EncoderParams& head, const Eigen::VectorXd& g) {
    return encode_one(head, g);
}

}  // namespace pcreg

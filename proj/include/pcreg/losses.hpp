#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pcreg/context.hpp"
#include "pcreg/geometry.hpp"
#include "pcreg/procrustes.hpp"
#include "pcreg/tape.hpp"

namespace pcreg {

/**
 * Records the per-point MLP (encode_one / project_head arithmetic: affine
 * layers, ReLU between them, L2 normalization at the end) on a tape so
 * gradients reach the flat parameter leaf. Forward values match the plain
 * encoder bit for bit because both paths share the same Eigen expressions.
 */
struct TapedEncoder {
    Tape* tape = nullptr;
    int params = -1;
    std::vector<LayerShape> shapes;

    static TapedEncoder attach(Tape& t, const EncoderParams& p) {
        TapedEncoder e;
        e.tape = &t;
        e.params = t.leaf(p.values);
        e.shapes = p.shapes;
        return e;
    }

    int operator()(int input) const {
        int h = input;
        const int last = static_cast<int>(shapes.size()) - 1;
        for (int l = 0; l <= last; ++l) {
            h = tape->affine(params, shapes, l, h);
            if (l < last) h = tape->relu(h);
        }
        return tape->l2norm(h);
    }

    int encode(const Eigen::VectorXd& context) const { return (*this)(tape->constant(context)); }
};

/**
 * Rebuilds each correspondence's ratio weight w = 1 - D1/D2 on the tape from
 * taped feature nodes, with cosine distance D = 1 - dot on unit features.
 * The match assignments (q and the runner-up) stay those recorded by
 * match_ratio_test; only the distances carry gradient. f0_nodes / f1_nodes
 * map point index to tape node; only indices referenced by c need be valid.
 * A nonpositive runner-up distance reproduces the matcher's weight-0
 * convention as a constant.
 */
inline std::vector<int> taped_ratio_weights(Tape& tape, const CorrespondenceSet& c,
                                            const std::vector<int>& f0_nodes,
                                            const std::vector<int>& f1_nodes) {
    const int one = tape.constant1(1.0);
    std::vector<int> weights;
    weights.reserve(c.items.size());
    for (const auto& corr : c.items) {
        if (corr.second < 0)
            throw std::invalid_argument("taped_ratio_weights: correspondence lacks runner-up");
        const std::vector<int>& query_side = corr.side == 0 ? f0_nodes : f1_nodes;
        const std::vector<int>& target_side = corr.side == 0 ? f1_nodes : f0_nodes;
        const int query = query_side.at(static_cast<std::size_t>(corr.side == 0 ? corr.p : corr.q));
        const int nn1 = target_side.at(static_cast<std::size_t>(corr.side == 0 ? corr.q : corr.p));
        const int nn2 = target_side.at(static_cast<std::size_t>(corr.second));
        const int d2 = tape.sub(one, tape.dot(query, nn2));
        if (tape.scalar(d2) <= 0.0) {
            weights.push_back(tape.constant1(0.0));
            continue;
        }
        const int d1 = tape.sub(one, tape.dot(query, nn1));
        weights.push_back(tape.sub(one, tape.div(d1, d2)));
    }
    return weights;
}

struct RegistrationLoss {
    int node = -1;  // scalar tape node; -1 when the batch item was skipped
    FitResult fit;
    bool skipped = false;
    std::string note;
};

/**
 * Alignment energy at the weighted Procrustes optimum. The transform enters
 * as a constant: at the optimum the energy is stationary in T, so the direct
 * partial through the L1-normalized weights is the gradient (finite
 * differences replay the same fixed-T graph). weight_nodes must align with
 * c.items when use_weights is on; without weights the loss is a constant
 * (gradient-free) diagnostic value. A degenerate or zero-weight fit returns
 * skipped with a note instead of throwing, so a bad pair costs one batch
 * item, not the run.
 */
inline RegistrationLoss registration_loss(const CorrespondenceSet& c, const PointCloud& p0,
                                          const PointCloud& p1, bool use_weights, Tape& tape,
                                          const std::vector<int>& weight_nodes = {}) {
    if (c.empty()) throw std::invalid_argument("registration_loss: empty correspondence set");
    RegistrationLoss out;
    if (use_weights) {
        if (weight_nodes.size() != c.items.size())
            throw std::invalid_argument("registration_loss: weight nodes misaligned with items");
        double lib_sum = 0.0;
        for (const auto& corr : c.items) lib_sum += corr.weight;
        if (lib_sum <= 0.0) {
            out.skipped = true;
            out.note = "registration_loss: correspondence weights sum to zero";
            return out;
        }
    }
    try {
        out.fit = weighted_procrustes(c, p0, p1, use_weights);
    } catch (const DegenerateError& e) {
        out.skipped = true;
        out.note = e.what();
        return out;
    }

    if (!use_weights) {
        out.node = tape.constant1(out.fit.residual_energy);
        return out;
    }

    int num = -1, den = -1;
    for (std::size_t i = 0; i < c.items.size(); ++i) {
        const auto& corr = c.items[i];
        const double r = (p1.positions[static_cast<std::size_t>(corr.q)] -
                          out.fit.transform.apply(p0.positions[static_cast<std::size_t>(corr.p)]))
                             .norm();
        const int w = weight_nodes[i];
        const int contrib = tape.scale(w, r);
        num = num < 0 ? contrib : tape.add(num, contrib);
        den = den < 0 ? w : tape.add(den, w);
    }
    if (tape.scalar(den) <= 0.0) {
        out.skipped = true;
        out.note = "registration_loss: taped weights sum to zero";
        return out;
    }
    out.node = tape.scale(tape.div(num, den), 1.0 / static_cast<double>(c.size()));
    return out;
}

/**
 * Mean bidirectional cosine distance between features and the projections of
 * their counterparts: (1/n) * sum D(g_p, z_q) + D(g_q, z_p) with
 * z = project(detach(g)). The projection head receives gradient; the detach
 * keeps any gradient from the z path out of the features. Value in [0, 4].
 */
inline int simsiam_loss(Tape& tape, const std::vector<std::pair<int, int>>& feature_pairs,
                        const TapedEncoder& head) {
    if (feature_pairs.empty())
        throw std::invalid_argument("simsiam_loss: empty correspondence set");
    const int one = tape.constant1(1.0);
    int total = -1;
    for (const auto& [gp, gq] : feature_pairs) {
        const int zp = head(tape.detach(gp));
        const int zq = head(tape.detach(gq));
        const int term =
            tape.add(tape.sub(one, tape.dot(gp, zq)), tape.sub(one, tape.dot(gq, zp)));
        total = total < 0 ? term : tape.add(total, term);
    }
    return tape.scale(total, 1.0 / static_cast<double>(feature_pairs.size()));
}

/// Uniform random rotation (Shoemake quaternion) applied to positions and
/// normals; the applied transform is returned for diagnostics.
inline std::pair<PointCloud, RigidTransform> rotation_augment(const PointCloud& p,
                                                              std::uint64_t seed) {
    CounterRng rng = CounterRng(seed).fork("rotation_augment");
    RigidTransform t;
    t.rotation = uniform_random_rotation(rng);
    t.translation.setZero();
    return {apply_transform(t, p), t};
}

}  // namespace pcreg

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "pcreg/checkpoint.hpp"
#include "pcreg/cloud.hpp"
#include "pcreg/context.hpp"
#include "pcreg/correspondence.hpp"
#include "pcreg/encoder.hpp"
#include "pcreg/losses.hpp"
#include "pcreg/metrics.hpp"
#include "pcreg/pipeline.hpp"
#include "pcreg/rng.hpp"
#include "pcreg/tape.hpp"

namespace pcreg {

/// byoc trains all three losses on colored pairs; byoc_geo drops the visual
/// and transfer losses (depth-only data, ratio weights kept so the geometric
/// encoder still receives gradient); byoc_rot is byoc plus an independent
/// random rotation of each cloud before encoding.
enum class Variant { byoc, byoc_geo, byoc_rot };

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::byoc: return "byoc";
        case Variant::byoc_geo: return "byoc-geo";
        default: return "byoc-rot";
    }
}

inline Variant variant_from_string(std::string_view s) {
    if (s == "byoc") return Variant::byoc;
    if (s == "byoc-geo" || s == "byoc_geo") return Variant::byoc_geo;
    if (s == "byoc-rot" || s == "byoc_rot") return Variant::byoc_rot;
    throw std::invalid_argument("unknown training variant '" + std::string(s) + "'");
}

struct TrainConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    std::int64_t iterations = 0;
    int batch_size = 8;
    Variant variant = Variant::byoc;
    double lambda_vis = 1.0;
    double lambda_geo = 1.0;
    double lambda_v2g = 1.0;
    int k_correspondences = 400;
    double voxel_size = 0.025;
    int neighbors = 16;
    std::uint64_t seed = 0;
    int threads = 4;

    /// Zero loss weights are legal (a disabled term, and how byoc_geo is
    /// expressed); optimizer rates must be strictly positive.
    void validate() const {
        if (learning_rate <= 0.0) throw std::invalid_argument("train: learning rate must be > 0");
        if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
            throw std::invalid_argument("train: momentum coefficients must lie in (0, 1)");
        if (iterations < 0) throw std::invalid_argument("train: iterations must be >= 0");
        if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
        if (lambda_vis < 0.0 || lambda_geo < 0.0 || lambda_v2g < 0.0)
            throw std::invalid_argument("train: loss weights must be >= 0");
        if (k_correspondences < 1) throw std::invalid_argument("train: k must be >= 1");
        if (voxel_size <= 0.0) throw std::invalid_argument("train: voxel size must be > 0");
        if (neighbors < 4) throw std::invalid_argument("train: neighbors must be >= 4");
        if (threads < 1) throw std::invalid_argument("train: threads must be >= 1");
    }

    /// The variant gates which weights are live: byoc_geo is the geometric
    /// registration loss alone regardless of the configured visual weights.
    double effective_lambda_vis() const {
        return variant == Variant::byoc_geo ? 0.0 : lambda_vis;
    }
    double effective_lambda_geo() const { return lambda_geo; }
    double effective_lambda_v2g() const {
        return variant == Variant::byoc_geo ? 0.0 : lambda_v2g;
    }
};

struct TrainingPair {
    PointCloud cloud0;
    PointCloud cloud1;
    RigidTransform ground_truth;
    std::string scene_id;
};

/// Per-batch record. Loss components are means over the used items; the
/// branch errors are diagnostics against ground truth (degrees / cm, -1 when
/// the batch produced no such fit) and never feed a gradient.
struct LossReport {
    std::int64_t iteration = 0;
    double loss_visual = 0.0;
    double loss_geometric = 0.0;
    double loss_v2g = 0.0;
    double total = 0.0;
    double rotation_visual_deg = -1.0;
    double translation_visual_cm = -1.0;
    double rotation_geometric_deg = -1.0;
    double translation_geometric_cm = -1.0;
    int used = 0;
    int skipped = 0;
};

inline nlohmann::json to_json(const LossReport& r) {
    nlohmann::json j;
    j["iteration"] = r.iteration;
    j["loss_visual"] = r.loss_visual;
    j["loss_geometric"] = r.loss_geometric;
    j["loss_v2g"] = r.loss_v2g;
    j["total"] = r.total;
    j["rotation_visual_deg"] = r.rotation_visual_deg;
    j["translation_visual_cm"] = r.translation_visual_cm;
    j["rotation_geometric_deg"] = r.rotation_geometric_deg;
    j["translation_geometric_cm"] = r.translation_geometric_cm;
    j["used"] = r.used;
    j["skipped"] = r.skipped;
    return j;
}

/**
 * Everything a resumed run needs: the three parameter groups plus Adam
 * moments and step counters. Two runs that reach the same iteration through
 * any checkpoint/resume split hold bit-identical state.
 */
struct TrainState {
    EncoderParams visual;
    EncoderParams geometric;
    EncoderParams head;
    Eigen::VectorXd m_visual, v_visual;
    Eigen::VectorXd m_geometric, v_geometric;
    Eigen::VectorXd m_head, v_head;
    std::int64_t adam_t = 0;
    std::int64_t iteration = 0;
};

inline TrainState make_train_state(const TrainConfig& cfg) {
    cfg.validate();
    TrainState s;
    CounterRng init = CounterRng(cfg.seed).fork("init");
    s.visual = random_init(init.fork("visual").next_u64(), encoder_shapes(visual_context_dim()));
    s.geometric = random_init(init.fork("geometric").next_u64(),
                              encoder_shapes(geometric_context_dim(cfg.neighbors)));
    s.head = random_init(init.fork("head").next_u64(), head_shapes());
    s.m_visual = Eigen::VectorXd::Zero(s.visual.values.size());
    s.v_visual = Eigen::VectorXd::Zero(s.visual.values.size());
    s.m_geometric = Eigen::VectorXd::Zero(s.geometric.values.size());
    s.v_geometric = Eigen::VectorXd::Zero(s.geometric.values.size());
    s.m_head = Eigen::VectorXd::Zero(s.head.values.size());
    s.v_head = Eigen::VectorXd::Zero(s.head.values.size());
    return s;
}

inline Checkpoint to_checkpoint(const TrainState& s) {
    Checkpoint ck;
    ck.add("visual", s.visual);
    ck.add("geometric", s.geometric);
    ck.add("head", s.head);
    ck.add_raw("adam_m_visual", s.m_visual);
    ck.add_raw("adam_v_visual", s.v_visual);
    ck.add_raw("adam_m_geometric", s.m_geometric);
    ck.add_raw("adam_v_geometric", s.v_geometric);
    ck.add_raw("adam_m_head", s.m_head);
    ck.add_raw("adam_v_head", s.v_head);
    // Counters ride as doubles; they stay far below 2^53 so the round trip
    // is exact.
    Eigen::VectorXd counters(2);
    counters << static_cast<double>(s.iteration), static_cast<double>(s.adam_t);
    ck.add_raw("state", counters);
    return ck;
}

inline TrainState train_state_from_checkpoint(const Checkpoint& ck) {
    TrainState s;
    s.visual = ck.params("visual");
    s.geometric = ck.params("geometric");
    s.head = ck.params("head");
    s.m_visual = ck.at("adam_m_visual").values;
    s.v_visual = ck.at("adam_v_visual").values;
    s.m_geometric = ck.at("adam_m_geometric").values;
    s.v_geometric = ck.at("adam_v_geometric").values;
    s.m_head = ck.at("adam_m_head").values;
    s.v_head = ck.at("adam_v_head").values;
    const auto check = [](const Eigen::VectorXd& moment, const EncoderParams& p,
                          const char* which) {
        if (moment.size() != p.values.size())
            throw CheckpointError(std::string("checkpoint: ") + which +
                                  " moment size does not match its parameters");
    };
    check(s.m_visual, s.visual, "visual");
    check(s.v_visual, s.visual, "visual");
    check(s.m_geometric, s.geometric, "geometric");
    check(s.v_geometric, s.geometric, "geometric");
    check(s.m_head, s.head, "head");
    check(s.v_head, s.head, "head");
    const Eigen::VectorXd& counters = ck.at("state").values;
    if (counters.size() != 2) throw CheckpointError("checkpoint: malformed state section");
    s.iteration = static_cast<std::int64_t>(counters[0]);
    s.adam_t = static_cast<std::int64_t>(counters[1]);
    if (s.iteration < 0 || s.adam_t < 0)
        throw CheckpointError("checkpoint: negative step counter");
    return s;
}

/// Batch composition for one iteration: which pair fills each slot and the
/// per-item seed. Keyed by the absolute iteration index so any
/// checkpoint/resume split replays the same batches.
struct BatchSlot {
    std::size_t pair_index = 0;
    std::uint64_t item_seed = 0;
};

inline std::vector<BatchSlot> batch_slots(const TrainConfig& cfg, std::int64_t iteration,
                                          std::size_t n_pairs) {
    if (n_pairs == 0) throw std::invalid_argument("train: empty dataset");
    CounterRng rng =
        CounterRng(cfg.seed).fork("batch").fork(static_cast<std::uint64_t>(iteration));
    std::vector<BatchSlot> slots(static_cast<std::size_t>(cfg.batch_size));
    for (auto& slot : slots) {
        slot.pair_index = static_cast<std::size_t>(rng.index(n_pairs));
        slot.item_seed = rng.next_u64();
    }
    return slots;
}

/// The two rotations byoc_rot applies to (cloud0, cloud1) for this item
/// seed; exposed so a log can record what the trainer did.
inline std::pair<RigidTransform, RigidTransform> augmentation_rotations(
    std::uint64_t item_seed) {
    CounterRng aug = CounterRng(item_seed).fork("augment");
    const std::uint64_t s0 = aug.next_u64();
    const std::uint64_t s1 = aug.next_u64();
    const PointCloud none;
    return {rotation_augment(none, s0).second, rotation_augment(none, s1).second};
}

namespace detail {

/// One batch item's contribution, computed on its own tape.
struct ItemResult {
    bool used = false;
    std::string note;
    Eigen::VectorXd grad_visual, grad_geometric, grad_head;
    double loss_visual = 0.0;
    double loss_geometric = 0.0;
    double loss_v2g = 0.0;
    double rotation_visual_deg = -1.0, translation_visual_cm = -1.0;
    double rotation_geometric_deg = -1.0, translation_geometric_cm = -1.0;
};

/**
 * Forward and backward for one training pair. Gradients reach the encoders
 * through the taped ratio weights of the registration losses and through the
 * transfer loss; in byoc / byoc_rot the geometric registration loss is an
 * unweighted (gradient-free) diagnostic per the branch-weighting convention,
 * while byoc_geo keeps its weights live. Degenerate pairs come back unused
 * with a note instead of throwing; missing colors with a visual loss active
 * are a data error and do throw.
 */
inline ItemResult train_item(const TrainState& state, const TrainConfig& cfg,
                             const TrainingPair& pair, std::uint64_t item_seed) {
    ItemResult out;
    out.grad_visual = Eigen::VectorXd::Zero(state.visual.values.size());
    out.grad_geometric = Eigen::VectorXd::Zero(state.geometric.values.size());
    out.grad_head = Eigen::VectorXd::Zero(state.head.values.size());

    const double lambda_vis = cfg.effective_lambda_vis();
    const double lambda_geo = cfg.effective_lambda_geo();
    const double lambda_v2g = cfg.effective_lambda_v2g();
    const bool need_visual = lambda_vis > 0.0 || lambda_v2g > 0.0;
    const bool need_geo_features = lambda_geo > 0.0 || lambda_v2g > 0.0;
    if (!need_visual && !need_geo_features) {
        // No live loss: the item contributes exactly zero gradient.
        out.used = true;
        return out;
    }

    if (pair.cloud0.empty() || pair.cloud1.empty()) {
        out.note = "empty cloud";
        return out;
    }

    PointCloud c0 = pair.cloud0;
    PointCloud c1 = pair.cloud1;
    RigidTransform gt = pair.ground_truth;
    if (cfg.variant == Variant::byoc_rot) {
        const auto [q0, q1] = augmentation_rotations(item_seed);
        c0 = apply_transform(q0, c0);
        c1 = apply_transform(q1, c1);
        gt = q1 * gt * q0.inverse();
    }

    const PointCloud v0 = voxel_downsample(c0, cfg.voxel_size).cloud;
    const PointCloud v1 = voxel_downsample(c1, cfg.voxel_size).cloud;
    const int min_points = std::max(cfg.neighbors, 3);
    if (v0.size() < min_points || v1.size() < min_points) {
        out.note = "cloud too small after voxel downsample";
        return out;
    }
    if (need_visual && (!v0.has_colors() || !v1.has_colors()))
        throw std::invalid_argument(
            "train: variant needs colors but a cloud has none (use byoc-geo for depth-only "
            "data)");

    const auto nb0 = neighbor_indices(v0, cfg.neighbors);
    const auto nb1 = neighbor_indices(v1, cfg.neighbors);
    PointMatrix vctx0, vctx1, gctx0, gctx1;
    if (need_visual) {
        vctx0 = visual_context_from_neighbors(v0, nb0);
        vctx1 = visual_context_from_neighbors(v1, nb1);
    }
    if (need_geo_features) {
        gctx0 = geometric_context_from_neighbors(v0, nb0);
        gctx1 = geometric_context_from_neighbors(v1, nb1);
    }

    const auto features_of = [](const EncoderParams& p, const PointMatrix& ctx,
                                const PointCloud& cloud, Modality m) {
        FeatureCloud f = encode(p, ctx);
        f.cloud = cloud;
        f.modality = m;
        return f;
    };

    CorrespondenceSet corr_vis, corr_geo;
    if (need_visual) {
        const FeatureCloud f0 = features_of(state.visual, vctx0, v0, Modality::visual);
        const FeatureCloud f1 = features_of(state.visual, vctx1, v1, Modality::visual);
        corr_vis = top_k_filter(match_ratio_test(f0, f1, Provenance::visual),
                                cfg.k_correspondences);
    }
    if (lambda_geo > 0.0) {
        const FeatureCloud g0 = features_of(state.geometric, gctx0, v0, Modality::geometric);
        const FeatureCloud g1 = features_of(state.geometric, gctx1, v1, Modality::geometric);
        corr_geo = top_k_filter(match_ratio_test(g0, g1, Provenance::geometric),
                                cfg.k_correspondences);
    }

    Tape tape;
    const TapedEncoder enc_vis = TapedEncoder::attach(tape, state.visual);
    const TapedEncoder enc_geo = TapedEncoder::attach(tape, state.geometric);
    const TapedEncoder enc_head = TapedEncoder::attach(tape, state.head);

    // Features are re-recorded on the tape only for the points a loss
    // touches; the taped forward shares the plain encoder's arithmetic, so
    // values (and hence match decisions) agree bit for bit.
    std::vector<int> nodes_vis0(static_cast<std::size_t>(v0.size()), -1);
    std::vector<int> nodes_vis1(static_cast<std::size_t>(v1.size()), -1);
    std::vector<int> nodes_geo0(static_cast<std::size_t>(v0.size()), -1);
    std::vector<int> nodes_geo1(static_cast<std::size_t>(v1.size()), -1);
    const auto ensure = [](std::vector<int>& nodes, const TapedEncoder& enc,
                           const PointMatrix& ctx, int i) {
        auto& slot = nodes[static_cast<std::size_t>(i)];
        if (slot < 0) slot = enc.encode(ctx.row(i).transpose());
        return slot;
    };

    int total = -1;
    const auto accumulate = [&](int node, double lambda) {
        const int term = tape.scale(node, lambda);
        total = total < 0 ? term : tape.add(total, term);
    };

    if (lambda_vis > 0.0) {
        for (const auto& corr : corr_vis.items) {
            ensure(nodes_vis0, enc_vis, vctx0, corr.p);
            ensure(nodes_vis1, enc_vis, vctx1, corr.q);
            if (corr.side == 0)
                ensure(nodes_vis1, enc_vis, vctx1, corr.second);
            else
                ensure(nodes_vis0, enc_vis, vctx0, corr.second);
        }
        const auto weights = taped_ratio_weights(tape, corr_vis, nodes_vis0, nodes_vis1);
        const RegistrationLoss loss = registration_loss(corr_vis, v0, v1, true, tape, weights);
        if (loss.skipped) {
            out.note = loss.note;
            return out;
        }
        out.loss_visual = tape.scalar(loss.node);
        out.rotation_visual_deg = rotation_error(loss.fit.transform.rotation, gt.rotation);
        out.translation_visual_cm =
            translation_error(loss.fit.transform.translation, gt.translation);
        accumulate(loss.node, lambda_vis);
    }

    if (lambda_geo > 0.0) {
        const bool weighted = cfg.variant == Variant::byoc_geo;
        std::vector<int> weights;
        if (weighted) {
            for (const auto& corr : corr_geo.items) {
                ensure(nodes_geo0, enc_geo, gctx0, corr.p);
                ensure(nodes_geo1, enc_geo, gctx1, corr.q);
                if (corr.side == 0)
                    ensure(nodes_geo1, enc_geo, gctx1, corr.second);
                else
                    ensure(nodes_geo0, enc_geo, gctx0, corr.second);
            }
            weights = taped_ratio_weights(tape, corr_geo, nodes_geo0, nodes_geo1);
        }
        const RegistrationLoss loss = registration_loss(corr_geo, v0, v1, weighted, tape, weights);
        if (loss.skipped) {
            out.note = loss.note;
            return out;
        }
        out.loss_geometric = tape.scalar(loss.node);
        out.rotation_geometric_deg = rotation_error(loss.fit.transform.rotation, gt.rotation);
        out.translation_geometric_cm =
            translation_error(loss.fit.transform.translation, gt.translation);
        accumulate(loss.node, lambda_geo);
    }

    if (lambda_v2g > 0.0) {
        // Visual correspondences pick which geometric features must agree.
        std::vector<std::pair<int, int>> transfer;
        transfer.reserve(corr_vis.items.size());
        for (const auto& corr : corr_vis.items)
            transfer.emplace_back(ensure(nodes_geo0, enc_geo, gctx0, corr.p),
                                  ensure(nodes_geo1, enc_geo, gctx1, corr.q));
        const int node = simsiam_loss(tape, transfer, enc_head);
        out.loss_v2g = tape.scalar(node);
        accumulate(node, lambda_v2g);
    }

    tape.backward(total);
    out.grad_visual = tape.grad(enc_vis.params);
    out.grad_geometric = tape.grad(enc_geo.params);
    out.grad_head = tape.grad(enc_head.params);
    out.used = true;
    return out;
}

/// Bias-corrected Adam with eps 1e-8. A zero gradient against zero moments
/// is a bitwise no-op on the parameters.
inline void adam_update(Eigen::VectorXd& p, Eigen::VectorXd& m, Eigen::VectorXd& v,
                        const Eigen::VectorXd& g, double lr, double beta1, double beta2,
                        std::int64_t t) {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + 1e-8);
}

}  // namespace detail

/**
 * One optimizer step: sample a batch (rng keyed by the absolute iteration
 * index, so a resumed run replays the same batches), run every item, average
 * gradients over the used items in slot order, and apply one shared-step
 * Adam update per parameter group. Items run on cfg.threads workers; each
 * owns its tape and the merge order is fixed, so thread scheduling cannot
 * reach the result. A batch with no usable item advances the iteration but
 * leaves parameters and moments untouched.
 */
inline LossReport train_step(TrainState& state, const TrainConfig& cfg,
                             const std::vector<TrainingPair>& pairs) {
    cfg.validate();
    if (pairs.empty()) throw std::invalid_argument("train: empty dataset");

    const std::vector<BatchSlot> slots = batch_slots(cfg, state.iteration, pairs.size());

    std::vector<detail::ItemResult> results(slots.size());
    std::vector<std::exception_ptr> errors(slots.size());
    const auto run_slot = [&](std::size_t b) {
        try {
            results[b] =
                detail::train_item(state, cfg, pairs[slots[b].pair_index], slots[b].item_seed);
        } catch (...) {
            errors[b] = std::current_exception();
        }
    };
    const int workers = std::min<int>(cfg.threads, static_cast<int>(slots.size()));
    if (workers <= 1) {
        for (std::size_t b = 0; b < slots.size(); ++b) run_slot(b);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t b = next++; b < slots.size(); b = next++) run_slot(b);
            });
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    LossReport report;
    report.iteration = state.iteration;
    Eigen::VectorXd g_vis = Eigen::VectorXd::Zero(state.visual.values.size());
    Eigen::VectorXd g_geo = Eigen::VectorXd::Zero(state.geometric.values.size());
    Eigen::VectorXd g_head = Eigen::VectorXd::Zero(state.head.values.size());
    int diag_vis = 0, diag_geo = 0;
    double rot_vis = 0.0, trans_vis = 0.0, rot_geo = 0.0, trans_geo = 0.0;
    for (const auto& item : results) {
        if (!item.used) {
            ++report.skipped;
            continue;
        }
        ++report.used;
        g_vis += item.grad_visual;
        g_geo += item.grad_geometric;
        g_head += item.grad_head;
        report.loss_visual += item.loss_visual;
        report.loss_geometric += item.loss_geometric;
        report.loss_v2g += item.loss_v2g;
        if (item.rotation_visual_deg >= 0.0) {
            ++diag_vis;
            rot_vis += item.rotation_visual_deg;
            trans_vis += item.translation_visual_cm;
        }
        if (item.rotation_geometric_deg >= 0.0) {
            ++diag_geo;
            rot_geo += item.rotation_geometric_deg;
            trans_geo += item.translation_geometric_cm;
        }
    }

    if (report.used > 0) {
        const double n = static_cast<double>(report.used);
        g_vis /= n;
        g_geo /= n;
        g_head /= n;
        report.loss_visual /= n;
        report.loss_geometric /= n;
        report.loss_v2g /= n;
        state.adam_t += 1;
        detail::adam_update(state.visual.values, state.m_visual, state.v_visual, g_vis,
                            cfg.learning_rate, cfg.beta1, cfg.beta2, state.adam_t);
        detail::adam_update(state.geometric.values, state.m_geometric, state.v_geometric, g_geo,
                            cfg.learning_rate, cfg.beta1, cfg.beta2, state.adam_t);
        detail::adam_update(state.head.values, state.m_head, state.v_head, g_head,
                            cfg.learning_rate, cfg.beta1, cfg.beta2, state.adam_t);
    }
    if (diag_vis > 0) {
        report.rotation_visual_deg = rot_vis / diag_vis;
        report.translation_visual_cm = trans_vis / diag_vis;
    }
    if (diag_geo > 0) {
        report.rotation_geometric_deg = rot_geo / diag_geo;
        report.translation_geometric_cm = trans_geo / diag_geo;
    }
    report.total = cfg.effective_lambda_vis() * report.loss_visual +
                   cfg.effective_lambda_geo() * report.loss_geometric +
                   cfg.effective_lambda_v2g() * report.loss_v2g;
    state.iteration += 1;
    return report;
}

/// Periodic held-out check: depth-only registration with the current
/// geometric encoder, randomized fit, fixed seed. Pairs whose fit degenerates
/// are counted, not fatal.
struct ValidationRecord {
    std::int64_t iteration = 0;
    int evaluated = 0;
    int failed = 0;
    double median_rotation_deg = -1.0;
    double median_translation_cm = -1.0;
};

inline nlohmann::json to_json(const ValidationRecord& r) {
    nlohmann::json j;
    j["iteration"] = r.iteration;
    j["evaluated"] = r.evaluated;
    j["failed"] = r.failed;
    j["median_rotation_deg"] = r.median_rotation_deg;
    j["median_translation_cm"] = r.median_translation_cm;
    return j;
}

inline ValidationRecord validate_registration(const TrainState& state, const TrainConfig& cfg,
                                              const std::vector<TrainingPair>& val_pairs) {
    RegisterOptions opts;
    opts.mode = FitMode::randomized;
    opts.modality = Modality::geometric;
    opts.voxel_size = cfg.voxel_size;
    opts.neighbors = cfg.neighbors;
    opts.k_correspondences = cfg.k_correspondences;
    opts.seed = cfg.seed;
    ValidationRecord record;
    record.iteration = state.iteration;
    std::vector<double> rotations, translations;
    for (const auto& pair : val_pairs) {
        try {
            const FitResult fit = register_clouds(pair.cloud0, pair.cloud1, state.geometric, opts);
            rotations.push_back(rotation_error(fit.transform.rotation, pair.ground_truth.rotation));
            translations.push_back(
                translation_error(fit.transform.translation, pair.ground_truth.translation));
            ++record.evaluated;
        } catch (const std::exception&) {
            ++record.failed;
        }
    }
    if (!rotations.empty()) {
        record.median_rotation_deg = detail::median_of(rotations);
        record.median_translation_cm = detail::median_of(translations);
    }
    return record;
}

struct TrainResult {
    TrainState state;
    std::vector<LossReport> log;
    std::vector<ValidationRecord> validation;
};

/**
 * Fresh initialization plus cfg.iterations optimizer steps. Deterministic
 * end to end in (config, data); when validation pairs and a cadence are
 * given, a held-out registration check runs every validate_every steps.
 */
inline TrainResult train(const std::vector<TrainingPair>& pairs, const TrainConfig& cfg,
                         const std::vector<TrainingPair>& val_pairs = {},
                         int validate_every = 0) {
    TrainResult out;
    out.state = make_train_state(cfg);
    out.log.reserve(static_cast<std::size_t>(cfg.iterations));
    while (out.state.iteration < cfg.iterations) {
        out.log.push_back(train_step(out.state, cfg, pairs));
        if (validate_every > 0 && !val_pairs.empty() &&
            out.state.iteration % validate_every == 0)
            out.validation.push_back(validate_registration(out.state, cfg, val_pairs));
    }
    return out;
}

}  // namespace pcreg

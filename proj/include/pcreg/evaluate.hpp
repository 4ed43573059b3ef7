#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "pcreg/cloud.hpp"
#include "pcreg/correspondence.hpp"
#include "pcreg/encoder.hpp"
#include "pcreg/fpfh.hpp"
#include "pcreg/icp.hpp"
#include "pcreg/manifest.hpp"
#include "pcreg/metrics.hpp"
#include "pcreg/ply.hpp"
#include "pcreg/procrustes.hpp"
#include "pcreg/rng.hpp"
#include "pcreg/scene_gen.hpp"

namespace pcreg {

enum class Estimator { procrustes, randomized, ransac, icp_p2p, icp_p2pl };

inline const char* to_string(Estimator e) {
    switch (e) {
        case Estimator::procrustes: return "procrustes";
        case Estimator::randomized: return "randomized";
        case Estimator::ransac: return "ransac";
        case Estimator::icp_p2p: return "icp-p2p";
        default: return "icp-p2pl";
    }
}

inline Estimator estimator_from_string(std::string_view s) {
    if (s == "procrustes") return Estimator::procrustes;
    if (s == "randomized") return Estimator::randomized;
    if (s == "ransac") return Estimator::ransac;
    if (s == "icp-p2p") return Estimator::icp_p2p;
    if (s == "icp-p2pl") return Estimator::icp_p2pl;
    throw std::invalid_argument("unknown estimator '" + std::string(s) + "'");
}

inline bool is_icp(Estimator e) {
    return e == Estimator::icp_p2p || e == Estimator::icp_p2pl;
}

/// What produces the per-point descriptors: a (random or trained) encoder in
/// its modality, or handcrafted FPFH histograms. ICP estimators ignore this.
struct EvalFeatures {
    bool fpfh = false;
    EncoderParams encoder;
    Modality modality = Modality::geometric;
};

inline EvalFeatures fpfh_features() {
    EvalFeatures f;
    f.fpfh = true;
    return f;
}

inline EvalFeatures random_features(Modality modality, int neighbors, std::uint64_t seed) {
    EvalFeatures f;
    f.modality = modality;
    const int dim = modality == Modality::visual ? visual_context_dim()
                                                 : geometric_context_dim(neighbors);
    f.encoder = random_init(seed, encoder_shapes(dim));
    return f;
}

inline EvalFeatures encoder_features(EncoderParams params, Modality modality) {
    EvalFeatures f;
    f.encoder = std::move(params);
    f.modality = modality;
    return f;
}

struct EvaluateOptions {
    Estimator estimator = Estimator::randomized;
    double voxel_size = 0.025;
    int neighbors = 16;
    int k_correspondences = 400;
    std::uint64_t seed = 0;
    int workers = 4;
    FmrConfig fmr;
    int randomized_subsets = 10;
    int randomized_subset_size = 80;
    int ransac_iterations = 1000;
    double ransac_inlier_threshold = 0.05;
    int icp_max_iters = 50;
    double icp_tol = 1e-6;

    void validate() const {
        if (voxel_size <= 0.0) throw std::invalid_argument("evaluate: voxel size must be > 0");
        if (neighbors < 4) throw std::invalid_argument("evaluate: neighbors must be >= 4");
        if (k_correspondences < 1) throw std::invalid_argument("evaluate: k must be >= 1");
        if (workers < 1) throw std::invalid_argument("evaluate: workers must be >= 1");
        fmr.validate();
        if (randomized_subsets < 1 || randomized_subset_size < 3)
            throw std::invalid_argument("evaluate: randomized fit needs >= 1 subset of >= 3");
        if (ransac_iterations < 1 || ransac_inlier_threshold <= 0.0)
            throw std::invalid_argument("evaluate: invalid ransac settings");
        if (icp_max_iters < 1 || icp_tol <= 0.0)
            throw std::invalid_argument("evaluate: invalid icp settings");
    }
};

/// One pair queued for evaluation; group names the scene family for the FMR
/// spread statistic.
struct EvalInput {
    PointCloud cloud0;
    PointCloud cloud1;
    RigidTransform ground_truth;
    std::string scene_id;
    std::string group;
};

struct PairEvaluation {
    std::string scene_id;
    PairMetrics metrics;
    FitResult fit;
    bool failed = false;  // no usable fit; metrics are absent from summaries
    std::string note;
    bool feature_matched = false;
};

struct EvaluationResult {
    std::vector<PairEvaluation> pairs;  // input order
    Report report;                      // over pairs with a usable fit
    FmrResult fmr;                      // feature estimators only
    bool has_fmr = false;
    int evaluated = 0;
    int failed = 0;
};

namespace detail {

struct PairOutcome {
    PairEvaluation eval;
    FmrEntry fmr_entry;
    bool has_fmr_entry = false;
};

/// Descriptor matrix for one voxelized cloud under the chosen feature source.
inline FeatureCloud eval_descriptors(const PointCloud& cloud, const EvalFeatures& features,
                                     int neighbors) {
    if (features.fpfh) {
        FeatureCloud f;
        f.features = fpfh_descriptor(cloud, neighbors).descriptors;
        f.cloud = cloud;
        f.modality = Modality::geometric;
        return f;
    }
    return featurize(cloud, features.encoder, features.modality, neighbors);
}

inline PairOutcome evaluate_one(const EvalInput& input, const EvalFeatures& features,
                                const EvaluateOptions& opts, std::uint64_t pair_seed) {
    PairOutcome out;
    out.eval.scene_id = input.scene_id;
    try {
        const PointCloud v0 = voxel_downsample(input.cloud0, opts.voxel_size).cloud;
        const PointCloud v1 = voxel_downsample(input.cloud1, opts.voxel_size).cloud;
        if (is_icp(opts.estimator)) {
            const IcpVariant variant = opts.estimator == Estimator::icp_p2p
                                           ? IcpVariant::point_to_point
                                           : IcpVariant::point_to_plane;
            out.eval.fit = icp(v0, v1, variant, RigidTransform::identity(), opts.icp_max_iters,
                               opts.icp_tol);
        } else {
            const int min_points = std::max(opts.neighbors, 3);
            if (v0.size() < min_points || v1.size() < min_points)
                throw DegenerateError("cloud too small after voxel downsample");
            const FeatureCloud f0 = eval_descriptors(v0, features, opts.neighbors);
            const FeatureCloud f1 = eval_descriptors(v1, features, opts.neighbors);
            const Provenance provenance = !features.fpfh && features.modality == Modality::visual
                                              ? Provenance::visual
                                              : Provenance::geometric;
            const CorrespondenceSet corr = top_k_filter(match_ratio_test(f0, f1, provenance),
                                                        opts.k_correspondences);
            // The recall check applies the stored transform to the second
            // cloud's points, so the entry carries the inverse of the pair
            // motion (which maps cloud0 onto cloud1).
            out.fmr_entry = {corr, v0, v1, input.ground_truth.inverse(), input.group};
            out.has_fmr_entry = true;
            switch (opts.estimator) {
                case Estimator::procrustes:
                    out.eval.fit = weighted_procrustes(corr, v0, v1, true);
                    break;
                case Estimator::randomized:
                    out.eval.fit = randomized_fit(
                        corr, v0, v1, opts.randomized_subsets,
                        std::min(opts.randomized_subset_size, corr.size()), pair_seed, true);
                    break;
                default:
                    out.eval.fit = ransac_fit(corr, v0, v1, opts.ransac_iterations,
                                              opts.ransac_inlier_threshold, pair_seed);
                    break;
            }
        }
        out.eval.metrics =
            pair_metrics(out.eval.fit.transform, input.ground_truth, input.cloud0, input.cloud1);
    } catch (const std::exception& e) {
        // A pair that cannot be registered is a result, not a crash. With an
        // FMR entry already built the correspondences still count; without
        // one the pair counts unmatched through its empty set.
        out.eval.failed = true;
        out.eval.note = e.what();
        if (!out.has_fmr_entry && !is_icp(opts.estimator)) {
            out.fmr_entry = {{}, {}, {}, input.ground_truth.inverse(), input.group};
            out.has_fmr_entry = true;
        }
    }
    return out;
}

}  // namespace detail

/**
 * Registers and scores every input pair: error/chamfer summary over the
 * usable fits plus feature-match recall over the correspondence sets
 * (feature estimators only; ICP forms no correspondences to score). Pairs
 * are processed on opts.workers threads and merged in input order, so the
 * worker count never reaches the result; per-pair estimator seeds come from
 * (opts.seed, position).
 */
inline EvaluationResult evaluate_pairs(const std::vector<EvalInput>& inputs,
                                       const EvalFeatures& features,
                                       const EvaluateOptions& opts = {}) {
    opts.validate();
    if (inputs.empty()) throw std::invalid_argument("evaluate: no pairs");
    if (!features.fpfh && !is_icp(opts.estimator)) {
        const int expected = features.modality == Modality::visual
                                 ? visual_context_dim()
                                 : geometric_context_dim(opts.neighbors);
        if (features.encoder.input_dim() != expected)
            throw std::invalid_argument(
                "evaluate: encoder input dimension does not match the modality and neighbor "
                "count");
    }

    std::vector<std::uint64_t> pair_seeds(inputs.size());
    CounterRng seeder = CounterRng(opts.seed).fork("evaluate");
    for (std::size_t i = 0; i < inputs.size(); ++i)
        pair_seeds[i] = seeder.fork(static_cast<std::uint64_t>(i)).next_u64();

    std::vector<detail::PairOutcome> outcomes(inputs.size());
    std::vector<std::exception_ptr> errors(inputs.size());
    const auto run_one = [&](std::size_t i) {
        try {
            outcomes[i] = detail::evaluate_one(inputs[i], features, opts, pair_seeds[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const int workers = std::min<int>(opts.workers, static_cast<int>(inputs.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < inputs.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < inputs.size(); i = next++) run_one(i);
            });
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    EvaluationResult result;
    result.pairs.reserve(inputs.size());
    std::vector<PairMetrics> usable;
    std::vector<FmrEntry> fmr_entries;
    for (auto& outcome : outcomes) {
        if (outcome.eval.failed)
            ++result.failed;
        else {
            ++result.evaluated;
            usable.push_back(outcome.eval.metrics);
        }
        if (outcome.has_fmr_entry) fmr_entries.push_back(std::move(outcome.fmr_entry));
        result.pairs.push_back(std::move(outcome.eval));
    }
    if (!usable.empty()) result.report = summarize(usable);
    if (!fmr_entries.empty()) {
        result.fmr = feature_match_recall(fmr_entries, opts.fmr);
        result.has_fmr = true;
        for (std::size_t i = 0; i < result.pairs.size(); ++i)
            result.pairs[i].feature_matched = result.fmr.matched[i] != 0;
    }
    return result;
}

/// Loads the manifest rows of one split (empty = all rows) with their PLY
/// clouds; the scene family (id prefix) becomes the FMR group.
inline std::vector<EvalInput> load_split(const std::filesystem::path& manifest_path,
                                         std::string_view split) {
    std::vector<EvalInput> inputs;
    for (const ScenePair& row : load_manifest(manifest_path)) {
        if (!split.empty() && row.split != split) continue;
        EvalInput input;
        input.cloud0 = load_ply(resolve_cloud_path(manifest_path, row.cloud0));
        input.cloud1 = load_ply(resolve_cloud_path(manifest_path, row.cloud1));
        input.ground_truth = row.ground_truth;
        input.scene_id = row.scene_id;
        input.group = family_of(row.scene_id);
        inputs.push_back(std::move(input));
    }
    return inputs;
}

inline EvaluationResult evaluate_manifest(const std::filesystem::path& manifest_path,
                                          std::string_view split, const EvalFeatures& features,
                                          const EvaluateOptions& opts = {}) {
    const std::vector<EvalInput> inputs = load_split(manifest_path, split);
    if (inputs.empty())
        throw std::runtime_error("evaluate: manifest has no rows for split '" +
                                 std::string(split) + "'");
    return evaluate_pairs(inputs, features, opts);
}

}  // namespace pcreg

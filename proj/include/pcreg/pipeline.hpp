#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pcreg/cloud.hpp"
#include "pcreg/correspondence.hpp"
#include "pcreg/encoder.hpp"
#include "pcreg/procrustes.hpp"

namespace pcreg {

enum class FitMode { procrustes, randomized, ransac };

inline const char* to_string(FitMode m) {
    switch (m) {
        case FitMode::procrustes: return "procrustes";
        case FitMode::randomized: return "randomized";
        default: return "ransac";
    }
}

inline FitMode fit_mode_from_string(std::string_view s) {
    if (s == "procrustes") return FitMode::procrustes;
    if (s == "randomized") return FitMode::randomized;
    if (s == "ransac") return FitMode::ransac;
    throw std::invalid_argument("unknown fit mode '" + std::string(s) + "'");
}

struct RegisterOptions {
    FitMode mode = FitMode::randomized;
    Modality modality = Modality::geometric;
    double voxel_size = 0.025;
    int neighbors = 16;
    int k_correspondences = 400;
    std::uint64_t seed = 0;
    int randomized_subsets = 10;
    int randomized_subset_size = 80;
    int ransac_iterations = 1000;
    double ransac_inlier_threshold = 0.05;

    void validate() const {
        if (voxel_size <= 0.0) throw std::invalid_argument("register: voxel size must be > 0");
        if (neighbors < 4) throw std::invalid_argument("register: neighbors must be >= 4");
        if (k_correspondences < 1) throw std::invalid_argument("register: k must be >= 1");
        if (randomized_subsets < 1 || randomized_subset_size < 3)
            throw std::invalid_argument("register: randomized fit needs >= 1 subset of >= 3");
        if (ransac_iterations < 1 || ransac_inlier_threshold <= 0.0)
            throw std::invalid_argument("register: invalid ransac settings");
    }
};

/**
 * End-to-end inference: voxelize both clouds, build per-point contexts,
 * encode with the given parameters, match with the ratio test, keep the top-k
 * correspondences, and fit with the chosen estimator. The result maps the
 * cloud0 frame into the cloud1 frame. Deterministic for fixed inputs and
 * seed; degeneracy errors from the fit propagate.
 */
inline FitResult register_clouds(const PointCloud& p0, const PointCloud& p1,
                                 const EncoderParams& params, const RegisterOptions& opts = {}) {
    opts.validate();
    const PointCloud v0 = voxel_downsample(p0, opts.voxel_size).cloud;
    const PointCloud v1 = voxel_downsample(p1, opts.voxel_size).cloud;
    const FeatureCloud f0 = featurize(v0, params, opts.modality, opts.neighbors);
    const FeatureCloud f1 = featurize(v1, params, opts.modality, opts.neighbors);
    const Provenance provenance =
        opts.modality == Modality::visual ? Provenance::visual : Provenance::geometric;
    const CorrespondenceSet corr =
        top_k_filter(match_ratio_test(f0, f1, provenance), opts.k_correspondences);

    switch (opts.mode) {
        case FitMode::procrustes:
            return weighted_procrustes(corr, v0, v1, true);
        case FitMode::randomized:
            return randomized_fit(corr, v0, v1, opts.randomized_subsets,
                                  std::min(opts.randomized_subset_size, corr.size()), opts.seed,
                                  true);
        default:
            return ransac_fit(corr, v0, v1, opts.ransac_iterations, opts.ransac_inlier_threshold,
                              opts.seed);
    }
}

}  // namespace pcreg

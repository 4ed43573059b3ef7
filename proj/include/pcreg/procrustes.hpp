#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcreg/cloud.hpp"
#include "pcreg/correspondence.hpp"
#include "pcreg/rng.hpp"

namespace pcreg {

struct FitResult {
    RigidTransform transform;
    double residual_energy = 0.0;
    int inlier_count = -1;  // meaningful for consensus-style fits only
    bool degenerate = false;
    std::string note;
    std::vector<double> iteration_energy;  // filled by iterative solvers
};

inline nlohmann::json to_json(const FitResult& fit) {
    nlohmann::json j;
    std::vector<double> rot(9);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            rot[static_cast<std::size_t>(3 * r + c)] = fit.transform.rotation(r, c);
    j["rotation"] = rot;
    j["translation"] = {fit.transform.translation.x(), fit.transform.translation.y(),
                        fit.transform.translation.z()};
    j["residual_energy"] = fit.residual_energy;
    j["inlier_count"] = fit.inlier_count;
    j["degenerate"] = fit.degenerate;
    if (!fit.note.empty()) j["note"] = fit.note;
    return j;
}

/**
 * Alignment energy E = (1/|C|) * sum_i (w_i / sum w) * ||x_q_i - T(x_p_i)||.
 * Note the norm is not squared and the weight normalization sits inside an
 * additional mean, so uniform weights give mean-residual / |C|.
 */
inline double residual_energy(const CorrespondenceSet& c, const PointCloud& p0,
                              const PointCloud& p1, const RigidTransform& t,
                              bool use_weights = true) {
    if (c.empty()) throw std::invalid_argument("residual_energy: empty correspondence set");
    double weight_sum = 0.0;
    if (use_weights) {
        for (const auto& corr : c.items) weight_sum += corr.weight;
        if (weight_sum <= 0.0)
            throw std::invalid_argument("residual_energy: weights sum to zero");
    } else {
        weight_sum = static_cast<double>(c.size());
    }
    double acc = 0.0;
    for (const auto& corr : c.items) {
        const double w = use_weights ? corr.weight : 1.0;
        const Eigen::Vector3d r = p1.positions[static_cast<std::size_t>(corr.q)] -
                                  t.apply(p0.positions[static_cast<std::size_t>(corr.p)]);
        acc += (w / weight_sum) * r.norm();
    }
    return acc / static_cast<double>(c.size());
}

/**
 * Closed-form minimizer of the weighted squared-residual objective
 * sum_i w_i ||x_q_i - (R x_p_i + t)||^2 over rigid transforms: weighted
 * centroids, weighted cross-covariance H, SVD H = U S V^T,
 * R = V diag(1, 1, det(VU^T)) U^T. The reported residual_energy is the
 * unsquared alignment energy at the optimum.
 *
 * Throws std::invalid_argument on fewer than 3 correspondences or all-zero
 * weights, DegenerateError when the correspondences are (near-)collinear:
 * second singular value below 1e-10 of the first.
 */
inline FitResult weighted_procrustes(const CorrespondenceSet& c, const PointCloud& p0,
                                     const PointCloud& p1, bool use_weights = true) {
    if (c.size() < 3)
        throw std::invalid_argument("weighted_procrustes: need at least 3 correspondences");
    double weight_sum = 0.0;
    for (const auto& corr : c.items) weight_sum += use_weights ? corr.weight : 1.0;
    if (weight_sum <= 0.0)
        throw std::invalid_argument("weighted_procrustes: weights sum to zero");

    Eigen::Vector3d mu0 = Eigen::Vector3d::Zero(), mu1 = Eigen::Vector3d::Zero();
    for (const auto& corr : c.items) {
        const double wn = (use_weights ? corr.weight : 1.0) / weight_sum;
        mu0 += wn * p0.positions[static_cast<std::size_t>(corr.p)];
        mu1 += wn * p1.positions[static_cast<std::size_t>(corr.q)];
    }
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (const auto& corr : c.items) {
        const double wn = (use_weights ? corr.weight : 1.0) / weight_sum;
        h += wn * (p0.positions[static_cast<std::size_t>(corr.p)] - mu0) *
             (p1.positions[static_cast<std::size_t>(corr.q)] - mu1).transpose();
    }

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sv = svd.singularValues();
    if (sv(1) < 1e-10 * sv(0) || sv(0) == 0.0)
        throw DegenerateError("weighted_procrustes: degenerate correspondence configuration");

    const Eigen::Matrix3d u = svd.matrixU();
    const Eigen::Matrix3d v = svd.matrixV();
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (v * u.transpose()).determinant();

    FitResult fit;
    fit.transform.rotation = v * d * u.transpose();
    fit.transform.translation = mu1 - fit.transform.rotation * mu0;
    fit.residual_energy = residual_energy(c, p0, p1, fit.transform, use_weights);
    fit.inlier_count = c.size();
    return fit;
}

/**
 * Robust fit by randomized subsets: n_subsets weight-proportional samples
 * (without replacement) of subset_size correspondences each, plus the
 * full-set fit as one more candidate; every candidate is fitted with
 * weighted_procrustes and scored by the alignment energy on the full set.
 * Deterministic for a given seed. Subsets that turn out degenerate are
 * skipped; if every candidate is degenerate the error propagates.
 */
inline FitResult randomized_fit(const CorrespondenceSet& c, const PointCloud& p0,
                                const PointCloud& p1, int n_subsets = 10,
                                int subset_size = 80, std::uint64_t seed = 0,
                                bool use_weights = true) {
    if (subset_size < 3)
        throw std::invalid_argument("randomized_fit: subset_size must be >= 3");
    if (c.size() < subset_size)
        throw std::invalid_argument("randomized_fit: fewer correspondences than subset_size");

    CounterRng rng = CounterRng(seed).fork("randomized_fit");
    bool have_best = false;
    FitResult best;
    std::string first_error;

    const auto consider = [&](const CorrespondenceSet& subset) {
        FitResult fit;
        try {
            fit = weighted_procrustes(subset, p0, p1, use_weights);
        } catch (const DegenerateError& e) {
            if (first_error.empty()) first_error = e.what();
            return;
        }
        fit.inlier_count = subset.size();
        fit.residual_energy = residual_energy(c, p0, p1, fit.transform, use_weights);
        if (!have_best || fit.residual_energy < best.residual_energy) {
            best = fit;
            have_best = true;
        }
    };

    consider(c);  // candidate 0: the single-shot full fit
    for (int s = 0; s < n_subsets; ++s) {
        CounterRng sub_rng = rng.fork(static_cast<std::uint64_t>(s));
        // Weight-proportional sampling without replacement; once the
        // remaining mass is zero the leftovers are drawn uniformly.
        std::vector<double> remaining(c.items.size());
        for (std::size_t i = 0; i < c.items.size(); ++i)
            remaining[i] = use_weights ? c.items[i].weight : 1.0;
        double total = 0.0;
        for (double w : remaining) total += w;

        CorrespondenceSet subset;
        subset.provenance = c.provenance;
        std::vector<int> alive(c.items.size());
        for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = static_cast<int>(i);
        for (int draw = 0; draw < subset_size; ++draw) {
            std::size_t pick = 0;
            if (total > 0.0) {
                const double target = sub_rng.uniform() * total;
                double acc = 0.0;
                pick = alive.size() - 1;
                for (std::size_t j = 0; j < alive.size(); ++j) {
                    acc += remaining[static_cast<std::size_t>(alive[j])];
                    if (acc > target) {
                        pick = j;
                        break;
                    }
                }
            } else {
                pick = static_cast<std::size_t>(sub_rng.index(alive.size()));
            }
            const int idx = alive[pick];
            subset.items.push_back(c.items[static_cast<std::size_t>(idx)]);
            total -= remaining[static_cast<std::size_t>(idx)];
            if (total < 0.0) total = 0.0;
            alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(pick));
        }
        consider(subset);
    }

    if (!have_best) throw DegenerateError(first_error);
    return best;
}

/**
 * Classic RANSAC over precomputed correspondences: 3-sample hypotheses,
 * consensus counted as ||x_q - T x_p|| < inlier_threshold, final refit on the
 * best consensus set with uniform weights. Energy is reported with uniform
 * weights. Deterministic for a given seed. If no hypothesis reaches 3
 * inliers, the best hypothesis is returned flagged degenerate.
 */
inline FitResult ransac_fit(const CorrespondenceSet& c, const PointCloud& p0,
                            const PointCloud& p1, int n_iters = 1000,
                            double inlier_threshold = 0.05, std::uint64_t seed = 0) {
    if (c.size() < 3) throw std::invalid_argument("ransac_fit: need at least 3 correspondences");

    CounterRng rng = CounterRng(seed).fork("ransac");
    const auto n = static_cast<std::uint64_t>(c.size());

    int best_inliers = -1;
    RigidTransform best_t;
    for (int it = 0; it < n_iters; ++it) {
        CounterRng iter_rng = rng.fork(static_cast<std::uint64_t>(it));
        std::uint64_t a = iter_rng.index(n), b = a, d = a;
        while (b == a) b = iter_rng.index(n);
        while (d == a || d == b) d = iter_rng.index(n);

        CorrespondenceSet sample;
        sample.items = {c.items[a], c.items[b], c.items[d]};
        RigidTransform t;
        try {
            t = weighted_procrustes(sample, p0, p1, false).transform;
        } catch (const DegenerateError&) {
            continue;
        }
        int inliers = 0;
        for (const auto& corr : c.items) {
            const double r = (p1.positions[static_cast<std::size_t>(corr.q)] -
                              t.apply(p0.positions[static_cast<std::size_t>(corr.p)]))
                                 .norm();
            inliers += r < inlier_threshold;
        }
        if (inliers > best_inliers) {
            best_inliers = inliers;
            best_t = t;
        }
    }

    FitResult fit;
    fit.transform = best_t;
    fit.inlier_count = std::max(best_inliers, 0);
    if (best_inliers < 3) {
        fit.degenerate = true;
        fit.note = "no consensus: every hypothesis had fewer than 3 inliers";
        if (best_inliers >= 0)
            fit.residual_energy = residual_energy(c, p0, p1, fit.transform, false);
        return fit;
    }

    CorrespondenceSet consensus;
    consensus.provenance = c.provenance;
    for (const auto& corr : c.items) {
        const double r = (p1.positions[static_cast<std::size_t>(corr.q)] -
                          best_t.apply(p0.positions[static_cast<std::size_t>(corr.p)]))
                             .norm();
        if (r < inlier_threshold) consensus.items.push_back(corr);
    }
    try {
        const FitResult refit = weighted_procrustes(consensus, p0, p1, false);
        fit.transform = refit.transform;
    } catch (const DegenerateError&) {
        fit.note = "refit degenerate; keeping hypothesis transform";
    }
    fit.residual_energy = residual_energy(c, p0, p1, fit.transform, false);
    return fit;
}

}  // namespace pcreg

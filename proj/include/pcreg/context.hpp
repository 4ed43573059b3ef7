#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pcreg/cloud.hpp"
#include "pcreg/feature_cloud.hpp"
#include "pcreg/kdtree.hpp"

namespace pcreg {

/// Geometric context per point: 3 covariance eigenvalues (descending) plus k
/// neighbor offsets expressed in the local eigenvector frame.
constexpr int geometric_context_dim(int k) { return 3 + 3 * k; }

/// Visual context per point: center color, mean neighbor color, per-channel
/// neighbor color variance. Carries no positional information.
constexpr int visual_context_dim() { return 9; }

/// k nearest neighbors of every point within its own cloud, the point itself
/// included (it is its own nearest neighbor at distance zero).
inline std::vector<std::vector<int>> neighbor_indices(const PointCloud& cloud, int k) {
    if (cloud.size() < k)
        throw std::invalid_argument("neighbor_indices: cloud smaller than k");
    KdTree tree(cloud.positions);
    std::vector<std::vector<int>> out(static_cast<std::size_t>(cloud.size()));
    std::vector<KnnHit> hits;
    for (int i = 0; i < cloud.size(); ++i) {
        tree.knn(cloud.positions[static_cast<std::size_t>(i)].data(), k, hits);
        auto& row = out[static_cast<std::size_t>(i)];
        row.reserve(hits.size());
        for (const auto& h : hits) row.push_back(h.index);
    }
    return out;
}

/**
 * Geometric context from precomputed neighborhoods. Offsets are taken
 * relative to the center point, which makes the context exactly translation
 * invariant, and are expressed in the frame of the neighborhood covariance
 * eigenvectors. Eigenvector signs follow a deterministic rule (offset sum
 * positive along each axis, falling back to a positive largest component
 * when the neighborhood is balanced), and the third axis completes a
 * right-handed frame, so the context is also insensitive to the eigensolver's
 * sign conventions.
 */
inline PointMatrix geometric_context_from_neighbors(
    const PointCloud& cloud, const std::vector<std::vector<int>>& neighbors) {
    const int n = cloud.size();
    const int k = static_cast<int>(neighbors.empty() ? 0 : neighbors.front().size());
    PointMatrix ctx(n, geometric_context_dim(k));
    for (int i = 0; i < n; ++i) {
        const auto& nbrs = neighbors[static_cast<std::size_t>(i)];
        const Eigen::Vector3d& center = cloud.positions[static_cast<std::size_t>(i)];

        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        for (int j : nbrs) mean += cloud.positions[static_cast<std::size_t>(j)];
        mean /= static_cast<double>(nbrs.size());
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        Eigen::Vector3d offset_sum = Eigen::Vector3d::Zero();
        for (int j : nbrs) {
            const Eigen::Vector3d d = cloud.positions[static_cast<std::size_t>(j)] - mean;
            cov += d * d.transpose();
            offset_sum += cloud.positions[static_cast<std::size_t>(j)] - center;
        }
        cov /= static_cast<double>(nbrs.size());

        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
        // Descending eigenvalues; the solver returns ascending.
        ctx(i, 0) = eig.eigenvalues()(2);
        ctx(i, 1) = eig.eigenvalues()(1);
        ctx(i, 2) = eig.eigenvalues()(0);

        Eigen::Vector3d e1 = eig.eigenvectors().col(2);
        Eigen::Vector3d e2 = eig.eigenvectors().col(1);
        const auto fix_sign = [&](Eigen::Vector3d& e) {
            const double along = e.dot(offset_sum);
            if (along < -1e-12) {
                e = -e;
            } else if (along <= 1e-12) {
                int arg = 0;
                e.cwiseAbs().maxCoeff(&arg);
                if (e(arg) < 0.0) e = -e;
            }
        };
        fix_sign(e1);
        fix_sign(e2);
        const Eigen::Vector3d e3 = e1.cross(e2);

        for (std::size_t j = 0; j < nbrs.size(); ++j) {
            const Eigen::Vector3d off =
                cloud.positions[static_cast<std::size_t>(nbrs[j])] - center;
            const auto col = 3 + 3 * static_cast<int>(j);
            ctx(i, col + 0) = e1.dot(off);
            ctx(i, col + 1) = e2.dot(off);
            ctx(i, col + 2) = e3.dot(off);
        }
    }
    return ctx;
}

/// Visual context from precomputed neighborhoods: center color, mean and
/// per-channel variance of the neighborhood's colors. Positions only pick
/// the neighbors; the context values are colors alone.
inline PointMatrix visual_context_from_neighbors(
    const PointCloud& cloud, const std::vector<std::vector<int>>& neighbors) {
    if (!cloud.has_colors())
        throw std::invalid_argument("visual context requires colors");
    const int n = cloud.size();
    PointMatrix ctx(n, visual_context_dim());
    for (int i = 0; i < n; ++i) {
        const auto& nbrs = neighbors[static_cast<std::size_t>(i)];
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        for (int j : nbrs) mean += cloud.colors[static_cast<std::size_t>(j)];
        mean /= static_cast<double>(nbrs.size());
        Eigen::Vector3d var = Eigen::Vector3d::Zero();
        for (int j : nbrs) {
            const Eigen::Vector3d d = cloud.colors[static_cast<std::size_t>(j)] - mean;
            var += d.cwiseProduct(d);
        }
        var /= static_cast<double>(nbrs.size());

        ctx.block<1, 3>(i, 0) = cloud.colors[static_cast<std::size_t>(i)].transpose();
        ctx.block<1, 3>(i, 3) = mean.transpose();
        ctx.block<1, 3>(i, 6) = var.transpose();
    }
    return ctx;
}

/// One context row per point; see the per-modality builders for the layout.
inline PointMatrix build_context(const PointCloud& cloud, Modality modality, int k = 16) {
    const auto neighbors = neighbor_indices(cloud, k);
    return modality == Modality::geometric
               ? geometric_context_from_neighbors(cloud, neighbors)
               : visual_context_from_neighbors(cloud, neighbors);
}

}  // namespace pcreg

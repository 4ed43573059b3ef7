#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <stdexcept>
#include <vector>

#include "pcreg/cloud.hpp"
#include "pcreg/kdtree.hpp"

namespace pcreg {

/**
 * Estimates per-point normals from the covariance of each point's k nearest
 * neighbors (the point itself included); the normal is the least-variance
 * eigenvector, flipped toward the viewpoint. Returns how many neighborhoods
 * were degenerate: nearly collinear samples, where the normal direction is
 * not well determined. Degenerate points still receive a deterministic unit
 * normal.
 */
inline int estimate_normals(PointCloud& cloud, int k = 16,
                            const Eigen::Vector3d& viewpoint = Eigen::Vector3d::Zero()) {
    if (cloud.empty()) throw std::invalid_argument("estimate_normals: empty cloud");
    const int n = static_cast<int>(cloud.size());
    const int kk = std::min(k, n);

    KdTree tree(cloud.positions);
    cloud.normals.resize(cloud.size());
    int degenerate = 0;
    std::vector<KnnHit> hits;
    for (int i = 0; i < n; ++i) {
        tree.knn(cloud.positions[static_cast<std::size_t>(i)].data(), kk, hits);
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        for (const auto& h : hits) mean += cloud.positions[static_cast<std::size_t>(h.index)];
        mean /= static_cast<double>(hits.size());
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (const auto& h : hits) {
            const Eigen::Vector3d d = cloud.positions[static_cast<std::size_t>(h.index)] - mean;
            cov += d * d.transpose();
        }
        cov /= static_cast<double>(hits.size());

        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
        const Eigen::Vector3d evals = eig.eigenvalues();  // ascending
        Eigen::Vector3d normal = eig.eigenvectors().col(0);
        // Collinear neighborhood: the two smallest variances both vanish
        // relative to the largest, so any direction in their plane fits.
        const double scale = std::max(evals[2], 1e-300);
        if (evals[1] / scale < 1e-9) ++degenerate;

        const Eigen::Vector3d to_view = viewpoint - cloud.positions[static_cast<std::size_t>(i)];
        if (normal.dot(to_view) < 0.0) normal = -normal;
        cloud.normals[static_cast<std::size_t>(i)] = normal.normalized();
    }
    return degenerate;
}

/// Symmetric chamfer distance: half the sum of the two directed mean
/// nearest-neighbor distances.
inline double chamfer_distance(const PointCloud& a, const PointCloud& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("chamfer_distance: empty cloud");
    const auto directed = [](const PointCloud& from, const PointCloud& to) {
        KdTree tree(to.positions);
        std::vector<KnnHit> hit;
        double sum = 0.0;
        for (const auto& p : from.positions) {
            tree.knn(p.data(), 1, hit);
            sum += hit[0].distance;
        }
        return sum / static_cast<double>(from.size());
    };
    return 0.5 * (directed(a, b) + directed(b, a));
}

}  // namespace pcreg

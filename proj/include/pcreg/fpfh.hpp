#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pcreg/cloud.hpp"
#include "pcreg/context.hpp"

namespace pcreg {

/// 33-dim histogram descriptors (11 bins each for alpha, phi, theta). A row
/// is flagged degenerate, and left zero, when no neighbor pair produced a
/// valid Darboux frame anywhere in its accumulation neighborhood.
struct FpfhResult {
    PointMatrix descriptors;
    std::vector<char> degenerate;
    int n_degenerate = 0;
};

namespace detail {

constexpr int kFpfhBins = 11;

inline int fpfh_bin(double v, double lo, double hi) {
    const int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * kFpfhBins));
    return std::clamp(b, 0, kFpfhBins - 1);
}

inline bool usable_normal(const Eigen::Vector3d& n) {
    return n.allFinite() && n.norm() > 1e-12;
}

}  // namespace detail

/**
 * Simplified FPFH over k-neighborhoods: per point a 3x11-bin histogram of the
 * Darboux angles (alpha, phi, theta) against each neighbor, normalized by the
 * valid pair count, then one distance-weighted re-accumulation over the same
 * neighborhood, then L2 normalization. Pairs with coincident points, parallel
 * normal and offset, or unusable normals are skipped.
 */
inline FpfhResult fpfh_descriptor(const PointCloud& cloud, int k = 16) {
    if (!cloud.has_normals())
        throw std::invalid_argument("fpfh_descriptor: normals required");
    if (cloud.size() < k)
        throw std::invalid_argument("fpfh_descriptor: cloud smaller than k");

    const auto neighbors = neighbor_indices(cloud, k);
    const int n = cloud.size();
    constexpr int dim = 3 * detail::kFpfhBins;
    constexpr double pi = 3.14159265358979323846;

    PointMatrix spfh = PointMatrix::Zero(n, dim);
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d& ps = cloud.positions[static_cast<std::size_t>(i)];
        const Eigen::Vector3d& ns_raw = cloud.normals[static_cast<std::size_t>(i)];
        if (!detail::usable_normal(ns_raw)) continue;
        const Eigen::Vector3d u = ns_raw.normalized();
        int valid = 0;
        for (int j : neighbors[static_cast<std::size_t>(i)]) {
            if (j == i) continue;
            const Eigen::Vector3d& nt_raw = cloud.normals[static_cast<std::size_t>(j)];
            if (!detail::usable_normal(nt_raw)) continue;
            const Eigen::Vector3d d = cloud.positions[static_cast<std::size_t>(j)] - ps;
            const double dist = d.norm();
            if (dist <= 0.0) continue;
            const Eigen::Vector3d dn = d / dist;
            Eigen::Vector3d v = dn.cross(u);
            const double vn = v.norm();
            if (vn < 1e-12) continue;
            v /= vn;
            const Eigen::Vector3d w = u.cross(v);
            const Eigen::Vector3d nt = nt_raw.normalized();

            const double alpha = v.dot(nt);
            const double phi = u.dot(dn);
            const double theta = std::atan2(w.dot(nt), u.dot(nt));
            spfh(i, detail::fpfh_bin(alpha, -1.0, 1.0)) += 1.0;
            spfh(i, detail::kFpfhBins + detail::fpfh_bin(phi, -1.0, 1.0)) += 1.0;
            spfh(i, 2 * detail::kFpfhBins + detail::fpfh_bin(theta, -pi, pi)) += 1.0;
            ++valid;
        }
        if (valid > 0) spfh.row(i) /= static_cast<double>(valid);
    }

    FpfhResult out;
    out.descriptors = PointMatrix::Zero(n, dim);
    out.degenerate.assign(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        Eigen::RowVectorXd acc = spfh.row(i);
        Eigen::RowVectorXd weighted = Eigen::RowVectorXd::Zero(dim);
        int k_used = 0;
        for (int j : neighbors[static_cast<std::size_t>(i)]) {
            if (j == i) continue;
            const double w = (cloud.positions[static_cast<std::size_t>(j)] -
                              cloud.positions[static_cast<std::size_t>(i)])
                                 .norm();
            if (w <= 0.0) continue;
            weighted += spfh.row(j) / w;
            ++k_used;
        }
        if (k_used > 0) acc += weighted / static_cast<double>(k_used);
        const double norm = acc.norm();
        if (norm > 0.0) {
            out.descriptors.row(i) = acc / norm;
        } else {
            out.degenerate[static_cast<std::size_t>(i)] = 1;
            ++out.n_degenerate;
        }
    }
    return out;
}

}  // namespace pcreg

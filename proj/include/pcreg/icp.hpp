#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pcreg/cloud.hpp"
#include "pcreg/kdtree.hpp"
#include "pcreg/procrustes.hpp"

namespace pcreg {

enum class IcpVariant { point_to_point, point_to_plane };

/**
 * Iterative closest point: alternate nearest-neighbor matching of the moving
 * cloud p0 against p1 with a transform update, until the relative change of
 * the mean squared matching distance drops below tol. The point-to-point
 * update is a uniform Procrustes fit (per-iteration energy never increases);
 * point-to-plane linearizes sum (n_q . (R x_p + t - x_q))^2 around the
 * current estimate and solves the 6x6 normal equations, which needs normals
 * on p1. A degenerate update leaves the best transform so far, flagged.
 */
inline FitResult icp(const PointCloud& p0, const PointCloud& p1,
                     IcpVariant variant = IcpVariant::point_to_point,
                     const RigidTransform& init = RigidTransform::identity(),
                     int max_iters = 50, double tol = 1e-6) {
    if (p0.empty() || p1.empty()) throw std::invalid_argument("icp: empty cloud");
    if (variant == IcpVariant::point_to_plane && !p1.has_normals())
        throw std::invalid_argument("icp: point-to-plane requires normals on the target");

    KdTree tree(p1.positions);
    FitResult fit;
    fit.transform = init;

    CorrespondenceSet matches;
    matches.items.resize(p0.positions.size());
    std::vector<KnnHit> hit;
    double prev_mse = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < max_iters; ++iter) {
        double mse = 0.0;
        for (int i = 0; i < p0.size(); ++i) {
            const Eigen::Vector3d moved =
                fit.transform.apply(p0.positions[static_cast<std::size_t>(i)]);
            tree.knn(moved.data(), 1, hit);
            matches.items[static_cast<std::size_t>(i)] = {i, hit[0].index, 1.0};
            mse += hit[0].distance * hit[0].distance;
        }
        mse /= static_cast<double>(p0.size());
        fit.iteration_energy.push_back(mse);

        const bool converged = std::isfinite(prev_mse) &&
                               std::abs(prev_mse - mse) <= tol * std::max(prev_mse, 1e-300);
        if (mse == 0.0 || converged) break;
        prev_mse = mse;

        if (variant == IcpVariant::point_to_point) {
            try {
                fit.transform = weighted_procrustes(matches, p0, p1, false).transform;
            } catch (const std::exception&) {
                fit.degenerate = true;
                fit.note = "degenerate matching; returning best so far";
                break;
            }
        } else {
            // Rows [ (T x_p) x n ; n ], right side n . (x_q - T x_p).
            Eigen::Matrix<double, 6, 6> ata = Eigen::Matrix<double, 6, 6>::Zero();
            Eigen::Matrix<double, 6, 1> atb = Eigen::Matrix<double, 6, 1>::Zero();
            for (const auto& m : matches.items) {
                const Eigen::Vector3d x = fit.transform.apply(
                    p0.positions[static_cast<std::size_t>(m.p)]);
                const Eigen::Vector3d& nq = p1.normals[static_cast<std::size_t>(m.q)];
                const Eigen::Vector3d& xq = p1.positions[static_cast<std::size_t>(m.q)];
                Eigen::Matrix<double, 6, 1> row;
                row.head<3>() = x.cross(nq);
                row.tail<3>() = nq;
                ata += row * row.transpose();
                atb += row * nq.dot(xq - x);
            }
            const Eigen::Matrix<double, 6, 1> delta = ata.ldlt().solve(atb);
            if (!delta.allFinite()) {
                fit.degenerate = true;
                fit.note = "singular point-to-plane system; returning best so far";
                break;
            }
            const Eigen::Vector3d omega = delta.head<3>();
            RigidTransform step;
            const double angle = omega.norm();
            step.rotation = angle > 0.0 ? axis_angle_rotation(omega / angle, angle)
                                        : Eigen::Matrix3d::Identity();
            step.translation = delta.tail<3>();
            fit.transform = step * fit.transform;
        }
    }

    fit.residual_energy = residual_energy(matches, p0, p1, fit.transform, false);
    fit.inlier_count = p0.size();
    return fit;
}

}  // namespace pcreg

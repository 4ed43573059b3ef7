#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "pcreg/rng.hpp"

namespace pcreg {

/// Raised when a computation hits a geometrically degenerate configuration
/// (collinear correspondences, rank-deficient covariance, ...).
class DegenerateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Point cloud with optional per-point color and normal channels.
 * Positions and normals are in meters / unit vectors; colors are RGB in [0,1].
 * Optional channels are either empty or match positions in length.
 */
struct PointCloud {
    std::vector<Eigen::Vector3d> positions;
    std::vector<Eigen::Vector3d> colors;
    std::vector<Eigen::Vector3d> normals;

    int size() const { return static_cast<int>(positions.size()); }
    bool empty() const { return positions.empty(); }
    bool has_colors() const { return !colors.empty(); }
    bool has_normals() const { return !normals.empty(); }

    /// Throws std::invalid_argument if channel lengths or normal norms are off.
    void validate() const {
        if (has_colors() && colors.size() != positions.size())
            throw std::invalid_argument("point cloud: color channel length mismatch");
        if (has_normals()) {
            if (normals.size() != positions.size())
                throw std::invalid_argument("point cloud: normal channel length mismatch");
            for (const auto& n : normals) {
                if (std::abs(n.norm() - 1.0) > 1e-6)
                    throw std::invalid_argument("point cloud: non-unit normal");
            }
        }
    }
};

/// Rigid motion x -> R x + t.
struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static RigidTransform identity() { return {}; }

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
        return rotation * p + translation;
    }

    RigidTransform inverse() const {
        RigidTransform inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(inv.rotation * translation);
        return inv;
    }

    /// Composition: (a * b)(x) = a(b(x)).
    RigidTransform operator*(const RigidTransform& rhs) const {
        RigidTransform out;
        out.rotation = rotation * rhs.rotation;
        out.translation = rotation * rhs.translation + translation;
        return out;
    }

    bool is_valid(double tol = 1e-6) const {
        const Eigen::Matrix3d err =
            rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
        if (err.cwiseAbs().maxCoeff() >= tol) return false;
        return std::abs(rotation.determinant() - 1.0) < tol;
    }
};

/// Positions mapped x -> Rx + t, normals rotated, colors untouched.
inline PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud) {
    PointCloud out;
    out.positions.reserve(cloud.positions.size());
    for (const auto& p : cloud.positions) out.positions.push_back(t.apply(p));
    out.colors = cloud.colors;
    out.normals.reserve(cloud.normals.size());
    for (const auto& n : cloud.normals) out.normals.push_back(t.rotation * n);
    return out;
}

/// Rotation by angle (radians) about a unit axis, via Rodrigues' formula.
inline Eigen::Matrix3d axis_angle_rotation(const Eigen::Vector3d& axis, double angle) {
    Eigen::Matrix3d k;
    k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
    return Eigen::Matrix3d::Identity() + std::sin(angle) * k +
           (1.0 - std::cos(angle)) * (k * k);
}

/// Geodesic angle (radians) of a rotation matrix. Uses atan2 of the skew
/// part against the trace, which stays accurate for tiny angles where the
/// plain arccos((tr - 1)/2) form bottoms out near sqrt(machine epsilon).
inline double rotation_angle(const Eigen::Matrix3d& r) {
    const Eigen::Vector3d skew{r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)};
    const double s = 0.5 * skew.norm();
    const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::atan2(s, c);
}

/// Haar-uniform random rotation from a uniformly sampled unit quaternion
/// (Shoemake's subgroup algorithm).
inline Eigen::Matrix3d uniform_random_rotation(CounterRng& rng) {
    const double u1 = rng.uniform();
    const double u2 = rng.uniform();
    const double u3 = rng.uniform();
    const double two_pi = 2.0 * std::numbers::pi;
    const Eigen::Quaterniond q(std::sqrt(u1) * std::cos(two_pi * u3),
                               std::sqrt(1.0 - u1) * std::sin(two_pi * u2),
                               std::sqrt(1.0 - u1) * std::cos(two_pi * u2),
                               std::sqrt(u1) * std::sin(two_pi * u3));
    return q.toRotationMatrix();
}

/// Integer voxel coordinate.
struct VoxelKey {
    std::int64_t x = 0, y = 0, z = 0;
    bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
    std::size_t operator()(const VoxelKey& k) const {
        std::uint64_t h = mix64(static_cast<std::uint64_t>(k.x));
        h = mix64(h ^ static_cast<std::uint64_t>(k.y));
        h = mix64(h ^ static_cast<std::uint64_t>(k.z));
        return static_cast<std::size_t>(h);
    }
};

inline VoxelKey voxel_key_of(const Eigen::Vector3d& p, double voxel_size) {
    return {static_cast<std::int64_t>(std::floor(p.x() / voxel_size)),
            static_cast<std::int64_t>(std::floor(p.y() / voxel_size)),
            static_cast<std::int64_t>(std::floor(p.z() / voxel_size))};
}

/// Occupancy map: one representative (output point index) per occupied cell.
struct VoxelGridIndex {
    double voxel_size = 0.025;
    std::unordered_map<VoxelKey, int, VoxelKeyHash> cells;
};

struct DownsampleResult {
    PointCloud cloud;
    /// For each output point, the input indices it absorbed.
    std::vector<std::vector<int>> absorbed;
    VoxelGridIndex grid;
};

/**
 * Voxel-grid downsampling. One output point per occupied cell: the centroid
 * of the cell's points, with colors averaged and normals averaged then
 * renormalized. Output order follows the first input index seen per cell,
 * which makes the operation deterministic and idempotent.
 */
inline DownsampleResult voxel_downsample(const PointCloud& cloud, double voxel_size) {
    if (voxel_size <= 0.0)
        throw std::invalid_argument("voxel_downsample: voxel_size must be positive");
    if (cloud.empty())
        throw std::invalid_argument("voxel_downsample: empty cloud");

    struct Cell {
        Eigen::Vector3d pos_sum = Eigen::Vector3d::Zero();
        Eigen::Vector3d color_sum = Eigen::Vector3d::Zero();
        Eigen::Vector3d normal_sum = Eigen::Vector3d::Zero();
        std::vector<int> members;
    };
    std::unordered_map<VoxelKey, Cell, VoxelKeyHash> cells;
    cells.reserve(static_cast<std::size_t>(cloud.size()));

    for (int i = 0; i < cloud.size(); ++i) {
        const auto key = voxel_key_of(cloud.positions[static_cast<std::size_t>(i)], voxel_size);
        Cell& c = cells[key];
        c.pos_sum += cloud.positions[static_cast<std::size_t>(i)];
        if (cloud.has_colors()) c.color_sum += cloud.colors[static_cast<std::size_t>(i)];
        if (cloud.has_normals()) c.normal_sum += cloud.normals[static_cast<std::size_t>(i)];
        c.members.push_back(i);
    }

    // Emit cells ordered by their first member index; hash-map iteration
    // order must not leak into the output.
    std::vector<const std::unordered_map<VoxelKey, Cell, VoxelKeyHash>::value_type*> ordered;
    ordered.reserve(cells.size());
    for (const auto& kv : cells) ordered.push_back(&kv);
    std::sort(ordered.begin(), ordered.end(),
              [](const auto* a, const auto* b) {
                  return a->second.members.front() < b->second.members.front();
              });

    DownsampleResult out;
    out.grid.voxel_size = voxel_size;
    out.cloud.positions.reserve(ordered.size());
    out.absorbed.reserve(ordered.size());
    for (const auto* kv : ordered) {
        const Cell& c = kv->second;
        const double n = static_cast<double>(c.members.size());
        const int out_index = out.cloud.size();
        out.cloud.positions.push_back(c.pos_sum / n);
        if (cloud.has_colors()) out.cloud.colors.push_back(c.color_sum / n);
        if (cloud.has_normals()) {
            Eigen::Vector3d avg = c.normal_sum / n;
            const double norm = avg.norm();
            out.cloud.normals.push_back(norm > 1e-12 ? Eigen::Vector3d(avg / norm)
                                                     : Eigen::Vector3d::UnitZ());
        }
        out.absorbed.push_back(c.members);
        out.grid.cells.emplace(kv->first, out_index);
    }
    return out;
}

}  // namespace pcreg

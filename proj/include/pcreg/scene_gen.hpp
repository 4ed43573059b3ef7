#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pcreg/cloud.hpp"
#include "pcreg/rng.hpp"

namespace pcreg {

/// Raised when no camera placement reaches the requested overlap band.
class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Synthetic scene generator settings. A pair is accepted when its overlap
 * fraction lands in [overlap_target - overlap_slack_low,
 * overlap_target + overlap_slack_high]; camera placement is retried up to
 * max_attempts times against the one relative motion drawn for the pair, so
 * retries never bias the motion statistics.
 */
struct SceneParams {
    int n_master = 6000;         // surface samples shared by both views
    double noise_sigma = 0.003;  // depth noise stddev in meters, along each view ray
    double overlap_target = 0.6;
    double overlap_slack_low = 0.15;
    double overlap_slack_high = 0.4;  // default band tops out at 1.0: near-identical
                                      // views are valid pairs, not failures
    double rotation_max_deg = 22.8;   // relative rotation angle ~ U(0, max), mean 11.4 deg
    double translation_max = 0.388;   // relative translation norm ~ U(0, max), mean 19.4 cm
    double fov_h_deg = 100.0;
    double fov_v_deg = 75.0;
    double hpr_resolution_rad = 0.03;  // angular z-buffer cell size
    double hpr_depth_slack = 0.08;     // meters behind the cell minimum still visible
    int max_attempts = 40;

    /// Wide-baseline preset: motions far outside the local-refinement basin.
    static SceneParams large_motion() {
        SceneParams p;
        p.rotation_max_deg = 60.0;
        p.translation_max = 0.8;
        p.overlap_target = 0.4;
        p.overlap_slack_low = 0.15;
        p.overlap_slack_high = 0.6;
        p.max_attempts = 80;
        return p;
    }

    void validate() const {
        if (n_master < 100) throw std::invalid_argument("scene params: n_master < 100");
        if (noise_sigma < 0.0) throw std::invalid_argument("scene params: negative noise sigma");
        if (overlap_target <= 0.0 || overlap_target > 1.0)
            throw std::invalid_argument("scene params: overlap target outside (0, 1]");
        if (overlap_slack_low < 0.0 || overlap_slack_high < 0.0)
            throw std::invalid_argument("scene params: negative overlap slack");
        if (overlap_target - overlap_slack_low <= 0.0)
            throw std::invalid_argument("scene params: overlap band reaches zero");
        if (rotation_max_deg < 0.0 || rotation_max_deg > 180.0)
            throw std::invalid_argument("scene params: rotation_max_deg outside [0, 180]");
        if (translation_max < 0.0)
            throw std::invalid_argument("scene params: negative translation_max");
        if (fov_h_deg < 10.0 || fov_h_deg > 170.0 || fov_v_deg < 10.0 || fov_v_deg > 170.0)
            throw std::invalid_argument("scene params: fov outside (10, 170) degrees");
        if (hpr_resolution_rad <= 0.0 || hpr_depth_slack <= 0.0)
            throw std::invalid_argument("scene params: non-positive visibility parameter");
        if (max_attempts < 1) throw std::invalid_argument("scene params: max_attempts < 1");
    }
};

/**
 * One generated registration pair. Both clouds are expressed in their own
 * camera frame; ground_truth maps the cloud0 frame into the cloud1 frame.
 * shared0/shared1 are aligned row indices of the points both views kept from
 * the common surface sample set, i.e. an exact sampling of the overlap
 * region; overlap is their count over the smaller view, in (0, 1].
 */
struct SyntheticPair {
    PointCloud cloud0, cloud1;
    RigidTransform ground_truth;
    double overlap = 0.0;
    std::string scene_id;
    std::uint64_t seed = 0;
    std::vector<int> shared0, shared1;
};

/// Scene archetypes; the prefix of a scene_id names its family.
inline constexpr std::array<std::string_view, 4> kSceneFamilies = {"slabs", "boxes", "columns",
                                                                  "mixed"};

inline std::string family_of(std::string_view scene_id) {
    return std::string(scene_id.substr(0, scene_id.find('_')));
}

/// Relative motion with rotation angle ~ U(0, rotation_max_deg) about a
/// uniform axis and translation norm ~ U(0, translation_max) along a uniform
/// direction, so the population means are half the maxima.
inline RigidTransform sample_motion(CounterRng& rng, const SceneParams& params) {
    const auto unit_vector = [&rng]() {
        const double z = rng.uniform(-1.0, 1.0);
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
        return Eigen::Vector3d(s * std::cos(phi), s * std::sin(phi), z);
    };
    const Eigen::Vector3d axis = unit_vector();
    const double angle = rng.uniform(0.0, params.rotation_max_deg * std::numbers::pi / 180.0);
    const Eigen::Vector3d direction = unit_vector();
    const double magnitude = rng.uniform(0.0, params.translation_max);
    RigidTransform motion;
    motion.rotation = axis_angle_rotation(axis, angle);
    motion.translation = magnitude * direction;
    return motion;
}

namespace detail {

/// Snap to the 8-bit color grid so serialized colors reload bit-exactly.
inline Eigen::Vector3d quantize_color(const Eigen::Vector3d& c) {
    Eigen::Vector3d out;
    for (int i = 0; i < 3; ++i)
        out[i] = std::round(std::clamp(c[i], 0.0, 1.0) * 255.0) / 255.0;
    return out;
}

/// Procedural two-color pattern over a surface's (u, v) chart. Pattern and
/// palette are drawn per surface, so appearance varies independently of shape.
struct Texture {
    int pattern = 0;  // 0 stripes-u, 1 stripes-v, 2 checker, 3 gradient
    double cycles_u = 1.0, cycles_v = 1.0;
    double phase_u = 0.0, phase_v = 0.0;
    Eigen::Vector3d color0 = Eigen::Vector3d::Zero();
    Eigen::Vector3d color1 = Eigen::Vector3d::Ones();

    Eigen::Vector3d at(double u, double v) const {
        const auto frac = [](double x) { return x - std::floor(x); };
        switch (pattern) {
            case 0:
                return frac(u * cycles_u + phase_u) < 0.5 ? color0 : color1;
            case 1:
                return frac(v * cycles_v + phase_v) < 0.5 ? color0 : color1;
            case 2: {
                const auto iu = static_cast<long>(std::floor(u * cycles_u + phase_u));
                const auto iv = static_cast<long>(std::floor(v * cycles_v + phase_v));
                return ((iu + iv) % 2 + 2) % 2 == 0 ? color0 : color1;
            }
            default:
                return quantize_color(color0 + (color1 - color0) * u);
        }
    }
};

/// Pattern wavelengths are drawn in meters and converted to whole cycles over
/// the chart, so stripe widths are size-independent.
inline Texture make_texture(CounterRng& rng, double len_u, double len_v) {
    Texture t;
    t.pattern = static_cast<int>(rng.index(4));
    const double wavelength = rng.uniform(0.12, 0.4);
    t.cycles_u = std::max(1.0, std::round(len_u / wavelength));
    t.cycles_v = std::max(1.0, std::round(len_v / wavelength));
    t.phase_u = rng.uniform();
    t.phase_v = rng.uniform();
    t.color0 = quantize_color({rng.uniform(), rng.uniform(), rng.uniform()});
    Eigen::Vector3d c1{rng.uniform(), rng.uniform(), rng.uniform()};
    if ((c1 - t.color0).cwiseAbs().sum() < 0.45) {
        // Force contrast: shift every channel half a turn.
        for (int i = 0; i < 3; ++i) c1[i] = c1[i] + 0.5 - std::floor(c1[i] + 0.5);
    }
    t.color1 = quantize_color(c1);
    return t;
}

enum class SurfaceKind { Rect, CylinderSide, Disc };

/**
 * One textured parametric patch over (u, v) in [0, 1)^2.
 *   Rect:          p = origin + u*edge_u + v*edge_v, constant normal.
 *   CylinderSide:  axis = edge_u (unit), reference radial = edge_v (unit);
 *                  u is the angle fraction, v climbs the height.
 *   Disc:          radius scaled by sqrt(u) for uniform area, angle from v.
 */
struct Surface {
    SurfaceKind kind = SurfaceKind::Rect;
    Eigen::Vector3d origin = Eigen::Vector3d::Zero();
    Eigen::Vector3d edge_u = Eigen::Vector3d::UnitX();
    Eigen::Vector3d edge_v = Eigen::Vector3d::UnitY();
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
    double radius = 0.0, height = 0.0;
    double area = 0.0;
    Texture tex;

    void sample(double u, double v, Eigen::Vector3d& pos, Eigen::Vector3d& nrm) const {
        switch (kind) {
            case SurfaceKind::Rect:
                pos = origin + u * edge_u + v * edge_v;
                nrm = normal;
                break;
            case SurfaceKind::CylinderSide: {
                const double theta = 2.0 * std::numbers::pi * u;
                const Eigen::Vector3d a2 = edge_u.cross(edge_v);
                const Eigen::Vector3d radial = std::cos(theta) * edge_v + std::sin(theta) * a2;
                pos = origin + radius * radial + v * height * edge_u;
                nrm = radial;
                break;
            }
            case SurfaceKind::Disc: {
                const double r = radius * std::sqrt(u);
                const double theta = 2.0 * std::numbers::pi * v;
                pos = origin + r * (std::cos(theta) * edge_u + std::sin(theta) * edge_v);
                nrm = normal;
                break;
            }
        }
    }
};

/// Keeps cameras out of furniture: reject positions horizontally inside an
/// obstacle footprint unless the camera clears its top.
struct Obstacle {
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    double radius = 0.0;
    double height = 0.0;
};

struct Room {
    double half_x = 0.0, half_y = 0.0, height = 0.0;
    std::vector<Surface> surfaces;
    std::vector<Obstacle> obstacles;
};

inline void add_rect(Room& room, CounterRng& rng, const Eigen::Vector3d& origin,
                     const Eigen::Vector3d& edge_u, const Eigen::Vector3d& edge_v,
                     const Eigen::Vector3d& normal) {
    Surface s;
    s.kind = SurfaceKind::Rect;
    s.origin = origin;
    s.edge_u = edge_u;
    s.edge_v = edge_v;
    s.normal = normal;
    s.area = edge_u.cross(edge_v).norm();
    s.tex = make_texture(rng, edge_u.norm(), edge_v.norm());
    room.surfaces.push_back(std::move(s));
}

/// Draw a footprint center keeping clear of walls and earlier furniture.
/// Bounded rejection; the last draw stands if every try collides.
inline Eigen::Vector2d place_footprint(Room& room, CounterRng& rng, double safe_radius,
                                       double piece_height) {
    const double rx = std::max(0.05, room.half_x - safe_radius - 0.15);
    const double ry = std::max(0.05, room.half_y - safe_radius - 0.15);
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    for (int attempt = 0; attempt < 8; ++attempt) {
        center = {rng.uniform(-rx, rx), rng.uniform(-ry, ry)};
        bool clear = true;
        for (const auto& o : room.obstacles)
            if ((center - o.center).norm() < safe_radius + o.radius + 0.05) clear = false;
        if (clear) break;
    }
    room.obstacles.push_back({center, safe_radius, piece_height});
    return center;
}

inline void add_box(Room& room, CounterRng& rng) {
    const double sx = rng.uniform(0.4, 1.1);
    const double sy = rng.uniform(0.4, 1.1);
    const double sz = rng.uniform(0.35, 1.0);
    const double yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Eigen::Vector3d ex{std::cos(yaw), std::sin(yaw), 0.0};
    const Eigen::Vector3d ey{-std::sin(yaw), std::cos(yaw), 0.0};
    const Eigen::Vector2d c2 = place_footprint(room, rng, 0.5 * std::hypot(sx, sy), sz);
    const Eigen::Vector3d corner =
        Eigen::Vector3d(c2.x(), c2.y(), 0.0) - 0.5 * sx * ex - 0.5 * sy * ey;
    const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
    // Five faces; the one on the floor can never be seen.
    add_rect(room, rng, corner + sz * up, sx * ex, sy * ey, up);
    add_rect(room, rng, corner + sx * ex, sy * ey, sz * up, ex);
    add_rect(room, rng, corner, sy * ey, sz * up, -ex);
    add_rect(room, rng, corner + sy * ey, sx * ex, sz * up, ey);
    add_rect(room, rng, corner, sx * ex, sz * up, -ey);
}

inline void add_cylinder(Room& room, CounterRng& rng) {
    const double radius = rng.uniform(0.12, 0.3);
    const double height = rng.uniform(0.6, std::min(1.7, room.height - 0.5));
    const Eigen::Vector2d c2 = place_footprint(room, rng, radius, height);

    Surface side;
    side.kind = SurfaceKind::CylinderSide;
    side.origin = {c2.x(), c2.y(), 0.0};
    side.edge_u = Eigen::Vector3d::UnitZ();
    side.edge_v = Eigen::Vector3d::UnitX();
    side.radius = radius;
    side.height = height;
    side.area = 2.0 * std::numbers::pi * radius * height;
    side.tex = make_texture(rng, 2.0 * std::numbers::pi * radius, height);
    room.surfaces.push_back(std::move(side));

    Surface top;
    top.kind = SurfaceKind::Disc;
    top.origin = {c2.x(), c2.y(), height};
    top.edge_u = Eigen::Vector3d::UnitX();
    top.edge_v = Eigen::Vector3d::UnitY();
    top.normal = Eigen::Vector3d::UnitZ();
    top.radius = radius;
    top.area = std::numbers::pi * radius * radius;
    top.tex = make_texture(rng, radius, radius);
    room.surfaces.push_back(std::move(top));
}

inline Room build_room(CounterRng& rng, std::string_view family) {
    Room room;
    room.half_x = rng.uniform(1.3, 2.3);
    room.half_y = rng.uniform(1.3, 2.3);
    room.height = rng.uniform(2.2, 2.8);
    const double hx = room.half_x, hy = room.half_y, h = room.height;
    const Eigen::Vector3d o{-hx, -hy, 0.0};
    const Eigen::Vector3d dx{2.0 * hx, 0.0, 0.0};
    const Eigen::Vector3d dy{0.0, 2.0 * hy, 0.0};
    const Eigen::Vector3d dz{0.0, 0.0, h};
    // Boundary, normals facing the interior.
    add_rect(room, rng, o, dx, dy, Eigen::Vector3d::UnitZ());
    add_rect(room, rng, o + dz, dx, dy, -Eigen::Vector3d::UnitZ());
    add_rect(room, rng, o + dx, dy, dz, -Eigen::Vector3d::UnitX());
    add_rect(room, rng, o, dy, dz, Eigen::Vector3d::UnitX());
    add_rect(room, rng, o + dy, dx, dz, -Eigen::Vector3d::UnitY());
    add_rect(room, rng, o, dx, dz, Eigen::Vector3d::UnitY());

    int n_boxes = 0, n_cylinders = 0;
    if (family == "slabs") {
        n_boxes = 1;
    } else if (family == "boxes") {
        n_boxes = 3 + static_cast<int>(rng.index(3));
    } else if (family == "columns") {
        n_boxes = 1;
        n_cylinders = 2 + static_cast<int>(rng.index(3));
    } else {
        n_boxes = 1 + static_cast<int>(rng.index(2));
        n_cylinders = 1 + static_cast<int>(rng.index(2));
    }
    for (int i = 0; i < n_boxes; ++i) add_box(room, rng);
    for (int i = 0; i < n_cylinders; ++i) add_cylinder(room, rng);
    return room;
}

/// Scene-wide surface samples. Both views select subsets of these points, so
/// the overlap region is sampled identically in both clouds.
struct MasterCloud {
    std::vector<Eigen::Vector3d> positions, normals, colors;
};

inline MasterCloud sample_master(const Room& room, int n, CounterRng& rng) {
    std::vector<double> cumulative;
    cumulative.reserve(room.surfaces.size());
    double total = 0.0;
    for (const auto& s : room.surfaces) {
        total += s.area;
        cumulative.push_back(total);
    }
    MasterCloud m;
    m.positions.reserve(static_cast<std::size_t>(n));
    m.normals.reserve(static_cast<std::size_t>(n));
    m.colors.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double x = rng.uniform() * total;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
        const auto idx = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                     static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
        const double u = rng.uniform();
        const double v = rng.uniform();
        Eigen::Vector3d pos, nrm;
        room.surfaces[idx].sample(u, v, pos, nrm);
        m.positions.push_back(pos);
        m.normals.push_back(nrm);
        m.colors.push_back(room.surfaces[idx].tex.at(u, v));
    }
    return m;
}

/// World-to-camera transform looking from pos toward target, x right, y down,
/// z forward, world up resolving roll.
inline RigidTransform look_at(const Eigen::Vector3d& pos, const Eigen::Vector3d& target) {
    Eigen::Vector3d forward = target - pos;
    if (forward.norm() < 1e-9) forward = Eigen::Vector3d::UnitX();
    forward.normalize();
    Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ());
    if (right.norm() < 1e-6) {
        forward = (forward + Eigen::Vector3d(0.05, 0.02, 0.0)).normalized();
        right = forward.cross(Eigen::Vector3d::UnitZ());
    }
    right.normalize();
    const Eigen::Vector3d down = forward.cross(right);
    RigidTransform w;
    w.rotation.row(0) = right;
    w.rotation.row(1) = down;
    w.rotation.row(2) = forward;
    w.translation = -(w.rotation * pos);
    return w;
}

inline Eigen::Vector3d camera_center(const RigidTransform& w) {
    return -(w.rotation.transpose() * w.translation);
}

/// First camera of a pair: positioned inside the room clear of furniture,
/// aimed at an interior target far enough away for a stable view direction.
inline RigidTransform sample_view(CounterRng& rng, const Room& room) {
    const double px = room.half_x - 0.55, py = room.half_y - 0.55;
    const double tx = room.half_x - 0.8, ty = room.half_y - 0.8;
    Eigen::Vector3d pos{0.0, 0.0, 1.5}, target{0.0, 0.0, 1.2};
    bool accepted = false;
    for (int attempt = 0; attempt < 32 && !accepted; ++attempt) {
        pos = {rng.uniform(-px, px), rng.uniform(-py, py),
               rng.uniform(1.15, std::min(1.85, room.height - 0.3))};
        target = {rng.uniform(-tx, tx), rng.uniform(-ty, ty), rng.uniform(0.7, 1.7)};
        accepted = (target - pos).head<2>().norm() >= 0.6;
        for (const auto& o : room.obstacles)
            if ((pos.head<2>() - o.center).norm() < o.radius + 0.15 && pos.z() < o.height + 0.1)
                accepted = false;
    }
    if (!accepted) {
        target = {0.0, 0.0, 1.2};
        if ((target - pos).head<2>().norm() < 0.3) target.x() += 1.0;
    }
    return look_at(pos, target);
}

/// Sanity bounds for the second camera, whose pose is derived rather than
/// drawn: inside the room and not staring straight along the vertical.
inline bool view_ok(const RigidTransform& w, const Room& room) {
    const Eigen::Vector3d c = camera_center(w);
    if (std::abs(c.x()) > room.half_x - 0.2 || std::abs(c.y()) > room.half_y - 0.2) return false;
    if (c.z() < 0.2 || c.z() > room.height - 0.05) return false;
    return std::abs(w.rotation(2, 2)) <= 0.98;
}

/**
 * Master-point indices visible from a camera: inside the frustum, front
 * facing, and surviving an angular z-buffer that keeps only points within
 * hpr_depth_slack of the nearest depth in their cell. Output is ascending.
 */
inline std::vector<int> visible_points(const MasterCloud& m, const RigidTransform& w,
                                       const SceneParams& params) {
    const Eigen::Vector3d c = camera_center(w);
    const double deg = std::numbers::pi / 180.0;
    const double half_h = 0.5 * params.fov_h_deg * deg;
    const double half_v = 0.5 * params.fov_v_deg * deg;
    const double res = params.hpr_resolution_rad;
    const int naz = std::max(1, static_cast<int>(std::ceil(2.0 * half_h / res)));
    const int nel = std::max(1, static_cast<int>(std::ceil(2.0 * half_v / res)));
    std::vector<double> zmin(static_cast<std::size_t>(naz * nel),
                             std::numeric_limits<double>::infinity());

    struct Candidate {
        int index, bin;
        double depth;
    };
    std::vector<Candidate> candidates;
    candidates.reserve(m.positions.size() / 2);
    for (std::size_t i = 0; i < m.positions.size(); ++i) {
        const Eigen::Vector3d pc = w.apply(m.positions[i]);
        if (pc.z() < 0.25 || pc.z() > 20.0) continue;
        const double az = std::atan2(pc.x(), pc.z());
        const double el = std::atan2(pc.y(), std::hypot(pc.x(), pc.z()));
        if (std::abs(az) > half_h || std::abs(el) > half_v) continue;
        if ((c - m.positions[i]).dot(m.normals[i]) <= 1e-12) continue;
        const int ia = std::min(naz - 1, static_cast<int>((az + half_h) / res));
        const int ie = std::min(nel - 1, static_cast<int>((el + half_v) / res));
        const int bin = ie * naz + ia;
        const double depth = pc.norm();
        auto& cell = zmin[static_cast<std::size_t>(bin)];
        cell = std::min(cell, depth);
        candidates.push_back({static_cast<int>(i), bin, depth});
    }
    std::vector<int> visible;
    visible.reserve(candidates.size());
    for (const auto& cand : candidates) {
        const double front = zmin[static_cast<std::size_t>(cand.bin)];
        if (cand.depth <= front + std::max(params.hpr_depth_slack, 0.02 * front))
            visible.push_back(cand.index);
    }
    return visible;
}

/// Selected master points in the camera frame, depth noise applied along the
/// per-point view ray. Zero sigma reproduces the noiseless positions exactly.
inline PointCloud view_cloud(const MasterCloud& m, const std::vector<int>& visible,
                             const RigidTransform& w, double sigma, CounterRng rng) {
    PointCloud out;
    out.positions.reserve(visible.size());
    out.colors.reserve(visible.size());
    out.normals.reserve(visible.size());
    for (const int idx : visible) {
        const auto i = static_cast<std::size_t>(idx);
        const Eigen::Vector3d pc = w.apply(m.positions[i]);
        const double eps = rng.normal(0.0, sigma);
        out.positions.push_back(pc + (eps / pc.norm()) * pc);
        out.colors.push_back(m.colors[i]);
        out.normals.push_back(w.rotation * m.normals[i]);
    }
    return out;
}

}  // namespace detail

/**
 * Generates one registration pair: a textured primitive room, one shared
 * surface sample set, two cameras related by a freshly drawn rigid motion,
 * per-view visibility, and depth noise along the rays. Bit-identical for a
 * given (seed, params). Throws GenerationError when max_attempts camera
 * placements all miss the overlap acceptance band.
 */
inline SyntheticPair generate_scene_pair(std::uint64_t seed, const SceneParams& params = {}) {
    params.validate();
    const CounterRng root(seed);
    CounterRng scene_rng = root.fork("scene");
    const std::string_view family = kSceneFamilies[scene_rng.index(kSceneFamilies.size())];
    const detail::Room room = detail::build_room(scene_rng, family);
    const detail::MasterCloud master = detail::sample_master(room, params.n_master, scene_rng);
    CounterRng motion_rng = root.fork("motion");
    const RigidTransform motion = sample_motion(motion_rng, params);

    const double lo = params.overlap_target - params.overlap_slack_low;
    const double hi = params.overlap_target + params.overlap_slack_high;
    double best_overlap = -1.0;
    for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
        CounterRng attempt_rng = root.fork("camera").fork(static_cast<std::uint64_t>(attempt));
        const RigidTransform w0 = detail::sample_view(attempt_rng, room);
        const RigidTransform w1 = motion * w0;  // cloud1 = motion applied to cloud0 frame
        if (!detail::view_ok(w1, room)) continue;
        const std::vector<int> vis0 = detail::visible_points(master, w0, params);
        const std::vector<int> vis1 = detail::visible_points(master, w1, params);
        if (vis0.size() < 50 || vis1.size() < 50) continue;

        std::vector<int> shared0, shared1;
        std::size_t i0 = 0, i1 = 0;
        while (i0 < vis0.size() && i1 < vis1.size()) {
            if (vis0[i0] < vis1[i1]) {
                ++i0;
            } else if (vis1[i1] < vis0[i0]) {
                ++i1;
            } else {
                shared0.push_back(static_cast<int>(i0));
                shared1.push_back(static_cast<int>(i1));
                ++i0;
                ++i1;
            }
        }
        const double overlap = static_cast<double>(shared0.size()) /
                               static_cast<double>(std::min(vis0.size(), vis1.size()));
        best_overlap = std::max(best_overlap, overlap);
        if (overlap < lo || overlap > hi) continue;

        CounterRng noise_rng = root.fork("noise");
        SyntheticPair pair;
        pair.cloud0 = detail::view_cloud(master, vis0, w0, params.noise_sigma, noise_rng.fork(0));
        pair.cloud1 = detail::view_cloud(master, vis1, w1, params.noise_sigma, noise_rng.fork(1));
        pair.ground_truth = motion;
        pair.overlap = overlap;
        pair.scene_id = std::string(family) + "_" + std::to_string(seed);
        pair.seed = seed;
        pair.shared0 = std::move(shared0);
        pair.shared1 = std::move(shared1);
        return pair;
    }
    throw GenerationError("scene " + std::to_string(seed) + ": no camera placement reached overlap [" +
                          std::to_string(lo) + ", " + std::to_string(hi) + "] in " +
                          std::to_string(params.max_attempts) + " attempts (best " +
                          std::to_string(best_overlap) + ")");
}

}  // namespace pcreg

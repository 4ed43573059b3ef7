#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcreg/cloud.hpp"
#include "pcreg/correspondence.hpp"
#include "pcreg/geometry.hpp"

namespace pcreg {

namespace detail {

inline void require_rotation(const Eigen::Matrix3d& r, const char* who) {
    const Eigen::Matrix3d err = r.transpose() * r - Eigen::Matrix3d::Identity();
    if (err.cwiseAbs().maxCoeff() >= 1e-6 || std::abs(r.determinant() - 1.0) >= 1e-6)
        throw std::invalid_argument(std::string(who) + ": input is not a rotation");
}

}  // namespace detail

/// Geodesic discrepancy in degrees: arccos of the clamped trace form. The
/// clamp guards the domain against rounding; accuracy thresholds are whole
/// degrees, so the arccos precision floor near zero is irrelevant here.
inline double rotation_error(const Eigen::Matrix3d& r_pr, const Eigen::Matrix3d& r_gt) {
    detail::require_rotation(r_pr, "rotation_error");
    detail::require_rotation(r_gt, "rotation_error");
    const double arg = std::clamp(((r_pr * r_gt.transpose()).trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(arg) * 180.0 / std::numbers::pi;
}

/// Euclidean gap between translations, reported in centimeters.
inline double translation_error(const Eigen::Vector3d& t_pr, const Eigen::Vector3d& t_gt) {
    return (t_pr - t_gt).norm() * 100.0;
}

/// Per-pair registration quality; accuracy flags are strict-threshold
/// predicates over these errors.
struct PairMetrics {
    double rotation_deg = 0.0;
    double translation_cm = 0.0;
    double chamfer_cm = 0.0;

    bool rotation_within(double deg) const { return rotation_deg < deg; }
    bool translation_within(double cm) const { return translation_cm < cm; }
    bool chamfer_within(double cm) const { return chamfer_cm < cm; }

    void validate() const {
        if (rotation_deg < 0.0 || translation_cm < 0.0 || chamfer_cm < 0.0)
            throw std::invalid_argument("pair metrics: negative error");
        if (rotation_deg > 180.0)
            throw std::invalid_argument("pair metrics: rotation error beyond 180 degrees");
    }
};

/// Errors of a predicted motion against ground truth, plus the chamfer gap
/// (cm) of the prediction-aligned clouds.
inline PairMetrics pair_metrics(const RigidTransform& pred, const RigidTransform& gt,
                                const PointCloud& p0, const PointCloud& p1) {
    PairMetrics m;
    m.rotation_deg = rotation_error(pred.rotation, gt.rotation);
    m.translation_cm = translation_error(pred.translation, gt.translation);
    m.chamfer_cm = chamfer_distance(apply_transform(pred, p0), p1) * 100.0;
    return m;
}

struct FmrConfig {
    double tau1 = 0.10;  // inlier distance, meters
    double tau2 = 0.05;  // inlier fraction a pair must exceed

    void validate() const {
        if (tau1 <= 0.0) throw std::invalid_argument("fmr config: tau1 must be positive");
        if (tau2 <= 0.0 || tau2 >= 1.0)
            throw std::invalid_argument("fmr config: tau2 must lie in (0, 1)");
    }
};

/**
 * One evaluated pair: correspondences between the clouds and the ground-truth
 * motion in the recall convention — the transform is applied to the second
 * cloud's point, so pass the motion carrying cloud-1 points onto their
 * cloud-0 counterparts. `group` names the scene family for the spread
 * statistic.
 */
struct FmrEntry {
    CorrespondenceSet corr;
    PointCloud p0, p1;
    RigidTransform gt;
    std::string group;
};

struct FmrResult {
    double recall = 0.0;
    double group_std = 0.0;  // population std dev of per-group recalls
    std::vector<char> matched;
    std::vector<std::string> diagnostics;
};

/// Inlier fraction strictly above tau2, inliers strictly inside tau1:
/// FM = [ (1/|C|) * sum 1(||x_p - T(x_q)|| < tau1) ] > tau2.
inline bool feature_match(const CorrespondenceSet& c, const PointCloud& p0,
                          const PointCloud& p1, const RigidTransform& gt,
                          const FmrConfig& cfg) {
    cfg.validate();
    if (c.empty()) throw std::invalid_argument("feature_match: empty correspondence set");
    int inliers = 0;
    for (const auto& corr : c.items) {
        const double r = (p0.positions[static_cast<std::size_t>(corr.p)] -
                          gt.apply(p1.positions[static_cast<std::size_t>(corr.q)]))
                             .norm();
        inliers += r < cfg.tau1;
    }
    return static_cast<double>(inliers) / static_cast<double>(c.size()) > cfg.tau2;
}

/// Fraction of pairs whose correspondences match (feature_match above), with
/// the spread of per-group recalls. A pair with no correspondences counts as
/// unmatched and leaves a diagnostic instead of failing the run.
inline FmrResult feature_match_recall(const std::vector<FmrEntry>& entries,
                                      const FmrConfig& cfg = {}) {
    cfg.validate();
    if (entries.empty()) throw std::invalid_argument("feature_match_recall: no pairs");

    FmrResult out;
    out.matched.reserve(entries.size());
    std::map<std::string, std::pair<int, int>> groups;  // matched, total
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const FmrEntry& e = entries[i];
        bool fm = false;
        if (e.corr.empty()) {
            out.diagnostics.push_back("pair " + std::to_string(i) +
                                      ": no correspondences, counted unmatched");
        } else {
            fm = feature_match(e.corr, e.p0, e.p1, e.gt, cfg);
        }
        out.matched.push_back(fm ? 1 : 0);
        auto& g = groups[e.group];
        g.first += fm ? 1 : 0;
        g.second += 1;
    }

    int matched_total = 0;
    for (char m : out.matched) matched_total += m;
    out.recall = static_cast<double>(matched_total) / static_cast<double>(entries.size());

    std::vector<double> per_group;
    per_group.reserve(groups.size());
    for (const auto& [name, counts] : groups)
        per_group.push_back(static_cast<double>(counts.first) /
                            static_cast<double>(counts.second));
    double mean = 0.0;
    for (double r : per_group) mean += r;
    mean /= static_cast<double>(per_group.size());
    double var = 0.0;
    for (double r : per_group) var += (r - mean) * (r - mean);
    out.group_std = std::sqrt(var / static_cast<double>(per_group.size()));
    return out;
}

struct MetricSummary {
    std::string metric;
    double mean = 0.0;
    double median = 0.0;
    std::vector<std::pair<double, double>> accuracies;  // threshold -> fraction
};

struct Report {
    std::vector<MetricSummary> metrics;
};

namespace detail {

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline MetricSummary summarize_one(const std::string& name, const std::vector<double>& values,
                                   const std::vector<double>& thresholds) {
    MetricSummary s;
    s.metric = name;
    double acc = 0.0;
    for (double v : values) acc += v;
    s.mean = acc / static_cast<double>(values.size());
    s.median = median_of(values);
    for (double t : thresholds) {
        int hits = 0;
        for (double v : values) hits += v < t;
        s.accuracies.emplace_back(t, static_cast<double>(hits) /
                                         static_cast<double>(values.size()));
    }
    return s;
}

inline std::string threshold_label(double t) {
    if (t == std::floor(t)) return std::to_string(static_cast<long long>(t));
    std::ostringstream os;
    os << t;
    return os.str();
}

}  // namespace detail

/// Mean, median, and strict accuracy-at-threshold per metric, at the standard
/// thresholds unless overridden.
inline Report summarize(const std::vector<PairMetrics>& metrics,
                        const std::vector<double>& rotation_thresholds = {5, 10, 45},
                        const std::vector<double>& translation_thresholds = {5, 10, 25},
                        const std::vector<double>& chamfer_thresholds = {1, 5, 10}) {
    if (metrics.empty()) throw std::invalid_argument("summarize: no pairs");
    std::vector<double> rot, trans, cham;
    for (const auto& m : metrics) {
        m.validate();
        rot.push_back(m.rotation_deg);
        trans.push_back(m.translation_cm);
        cham.push_back(m.chamfer_cm);
    }
    Report r;
    r.metrics.push_back(detail::summarize_one("rotation_deg", rot, rotation_thresholds));
    r.metrics.push_back(detail::summarize_one("translation_cm", trans, translation_thresholds));
    r.metrics.push_back(detail::summarize_one("chamfer_cm", cham, chamfer_thresholds));
    return r;
}

/// {"metrics": [{metric, mean, median, accuracies: {threshold: fraction}}]}.
inline nlohmann::json to_json(const Report& r) {
    nlohmann::json j;
    j["metrics"] = nlohmann::json::array();
    for (const auto& m : r.metrics) {
        nlohmann::json e;
        e["metric"] = m.metric;
        e["mean"] = m.mean;
        e["median"] = m.median;
        e["accuracies"] = nlohmann::json::object();
        for (const auto& [t, frac] : m.accuracies)
            e["accuracies"][detail::threshold_label(t)] = frac;
        j["metrics"].push_back(e);
    }
    return j;
}

/// Inverse of to_json(Report). JSON objects hand keys back alphabetized, so
/// accuracy thresholds are re-sorted ascending to restore column order.
inline Report report_from_json(const nlohmann::json& j) {
    Report r;
    for (const auto& e : j.at("metrics")) {
        MetricSummary m;
        m.metric = e.at("metric").get<std::string>();
        m.mean = e.at("mean").get<double>();
        m.median = e.at("median").get<double>();
        for (const auto& [label, frac] : e.at("accuracies").items())
            m.accuracies.emplace_back(std::stod(label), frac.get<double>());
        std::sort(m.accuracies.begin(), m.accuracies.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        r.metrics.push_back(std::move(m));
    }
    return r;
}

/// Fixed-width text rendering; accuracies as percentages.
inline std::string format_table(const Report& r) {
    std::ostringstream os;
    os << std::left << std::setw(18) << "metric" << std::right << std::setw(12) << "mean"
       << std::setw(12) << "median"
       << "   accuracy\n";
    for (const auto& m : r.metrics) {
        os << std::left << std::setw(18) << m.metric << std::right << std::fixed
           << std::setprecision(3) << std::setw(12) << m.mean << std::setw(12) << m.median
           << "   ";
        for (const auto& [t, frac] : m.accuracies)
            os << "<" << detail::threshold_label(t) << ": " << std::setprecision(1)
               << 100.0 * frac << "%  ";
        os << std::setprecision(3) << "\n";
    }
    return os.str();
}

}  // namespace pcreg

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pcreg/feature_cloud.hpp"

namespace pcreg {

/// A match between point p of cloud 0 and point q of cloud 1, with an
/// ambiguity weight in [0,1] (1 = unambiguous). side records which cloud the
/// query came from and second the ratio-test runner-up in the target cloud,
/// so the weight can be recomputed from features later.
struct Correspondence {
    int p = 0;
    int q = 0;
    double weight = 0.0;
    int side = 0;
    int second = -1;
};

enum class Provenance { visual, geometric };

inline const char* to_string(Provenance p) {
    return p == Provenance::visual ? "visual" : "geometric";
}

/// Correspondences ordered by descending weight, ties by (p, q) ascending.
struct CorrespondenceSet {
    std::vector<Correspondence> items;
    Provenance provenance = Provenance::visual;

    int size() const { return static_cast<int>(items.size()); }
    bool empty() const { return items.empty(); }
};

namespace detail {

inline bool correspondence_order(const Correspondence& a, const Correspondence& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    if (a.p != b.p) return a.p < b.p;
    return a.q < b.q;
}

/// Cosine distance 1 - dot recovered from the Euclidean distance between
/// unit vectors, so the value ordering agrees exactly with the hit ordering.
inline double cosine_from_euclidean(double dist) { return dist * dist / 2.0; }

}  // namespace detail

/**
 * Matches every point of each cloud against the other via its two nearest
 * neighbors in cosine distance, weighting by Lowe's ratio
 * w = 1 - d_nn1 / d_nn2. Both directions are emitted (|F0| + |F1| candidates,
 * no deduplication); rows are unit-normalized before matching. A zero second
 * distance means the match is fully ambiguous and gets weight 0.
 */
inline CorrespondenceSet match_ratio_test(const FeatureCloud& f0, const FeatureCloud& f1,
                                          Provenance provenance = Provenance::visual) {
    if (f0.dim() != f1.dim())
        throw std::invalid_argument("match_ratio_test: feature dimension mismatch");
    if (f0.size() < 2 || f1.size() < 2)
        throw std::invalid_argument("match_ratio_test: need at least 2 points per cloud");

    const auto normalize_rows = [](const PointMatrix& m) {
        PointMatrix out = m;
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            const double n = out.row(i).norm();
            if (n > 0.0) out.row(i) /= n;
        }
        return out;
    };
    const PointMatrix a = normalize_rows(f0.features);
    const PointMatrix b = normalize_rows(f1.features);

    CorrespondenceSet set;
    set.provenance = provenance;
    set.items.reserve(static_cast<std::size_t>(f0.size() + f1.size()));

    std::vector<KnnHit> hits;
    const auto lowe = [](const std::vector<KnnHit>& h) {
        const double d1 = detail::cosine_from_euclidean(h[0].distance);
        const double d2 = detail::cosine_from_euclidean(h[1].distance);
        return d2 > 0.0 ? 1.0 - d1 / d2 : 0.0;
    };
    for (Eigen::Index p = 0; p < a.rows(); ++p) {
        scan_knn(b, a.row(p).data(), 2, hits);
        set.items.push_back({static_cast<int>(p), hits[0].index, lowe(hits), 0, hits[1].index});
    }
    for (Eigen::Index q = 0; q < b.rows(); ++q) {
        scan_knn(a, b.row(q).data(), 2, hits);
        set.items.push_back({hits[0].index, static_cast<int>(q), lowe(hits), 1, hits[1].index});
    }
    std::sort(set.items.begin(), set.items.end(), detail::correspondence_order);
    return set;
}

/// Keeps the k highest-weight correspondences (all, if fewer), in the set's
/// canonical order.
inline CorrespondenceSet top_k_filter(const CorrespondenceSet& c, int k) {
    if (k < 1) throw std::invalid_argument("top_k_filter: k must be >= 1");
    CorrespondenceSet out;
    out.provenance = c.provenance;
    out.items = c.items;
    std::sort(out.items.begin(), out.items.end(), detail::correspondence_order);
    if (static_cast<int>(out.items.size()) > k)
        out.items.resize(static_cast<std::size_t>(k));
    return out;
}

/**
 * Looks up the feature pair behind each correspondence in a second (typically
 * geometric) feature space over the same points. Weights are dropped; the
 * consumer treats the pairs uniformly.
 */
inline std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> transfer_correspondences(
    const CorrespondenceSet& c, const FeatureCloud& g0, const FeatureCloud& g1) {
    std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> out;
    out.reserve(c.items.size());
    for (const auto& corr : c.items) {
        if (corr.p < 0 || corr.p >= g0.size() || corr.q < 0 || corr.q >= g1.size())
            throw std::logic_error("transfer_correspondences: index out of range");
        out.emplace_back(g0.features.row(corr.p).transpose(),
                         g1.features.row(corr.q).transpose());
    }
    return out;
}

/// One JSON object per line: {p, q, weight, provenance}.
inline void save_correspondences(const std::filesystem::path& path,
                                 const CorrespondenceSet& c) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    for (const auto& corr : c.items) {
        nlohmann::json j;
        j["p"] = corr.p;
        j["q"] = corr.q;
        j["weight"] = corr.weight;
        j["provenance"] = to_string(c.provenance);
        out << j.dump() << "\n";
    }
}

}  // namespace pcreg

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace pcreg {

/// Row-major N x D storage; each row is one point, contiguous in memory.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct KnnHit {
    int index = -1;
    double distance = 0.0;
};

inline PointMatrix to_matrix(const std::vector<Eigen::Vector3d>& pts) {
    PointMatrix m(static_cast<Eigen::Index>(pts.size()), 3);
    for (std::size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[i];
    return m;
}

namespace detail {

/// Bounded best-k set ordered by (squared distance, index); ties prefer the
/// lower reference index so results are deterministic across platforms.
class KnnAccumulator {
public:
    KnnAccumulator(int k, std::vector<KnnHit>& out) : k_(k), hits_(out) {
        hits_.clear();
        hits_.reserve(static_cast<std::size_t>(k));
    }

    double worst() const {
        return hits_.size() < static_cast<std::size_t>(k_)
                   ? std::numeric_limits<double>::infinity()
                   : hits_.back().distance;
    }

    void offer(int index, double d2) {
        if (hits_.size() == static_cast<std::size_t>(k_)) {
            const KnnHit& w = hits_.back();
            if (d2 > w.distance || (d2 == w.distance && index > w.index)) return;
            hits_.pop_back();
        }
        KnnHit hit{index, d2};
        auto pos = std::upper_bound(hits_.begin(), hits_.end(), hit,
                                    [](const KnnHit& a, const KnnHit& b) {
                                        return a.distance < b.distance ||
                                               (a.distance == b.distance && a.index < b.index);
                                    });
        hits_.insert(pos, hit);
    }

    void finalize() {
        for (auto& h : hits_) h.distance = std::sqrt(h.distance);
    }

private:
    int k_;
    std::vector<KnnHit>& hits_;
};

inline double squared_distance(const double* a, const double* b, int dim) {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) {
        const double diff = a[d] - b[d];
        s += diff * diff;
    }
    return s;
}

}  // namespace detail

/**
 * kd-tree over D-dimensional points with exact k-nearest-neighbor queries.
 * Median splits on the widest dimension, leaves of up to 16 points.
 * Equal distances resolve to the lower point index.
 */
class KdTree {
public:
    explicit KdTree(PointMatrix points) : points_(std::move(points)) {
        if (points_.rows() == 0) throw std::invalid_argument("KdTree: empty reference set");
        order_.resize(static_cast<std::size_t>(points_.rows()));
        std::iota(order_.begin(), order_.end(), 0);
        nodes_.reserve(static_cast<std::size_t>(2 * points_.rows() / kLeafSize + 2));
        root_ = build(0, static_cast<int>(points_.rows()));
    }

    explicit KdTree(const std::vector<Eigen::Vector3d>& pts) : KdTree(to_matrix(pts)) {}

    int size() const { return static_cast<int>(points_.rows()); }
    int dim() const { return static_cast<int>(points_.cols()); }

    void knn(const double* query, int k, std::vector<KnnHit>& out) const {
        if (k < 1) throw std::invalid_argument("knn: k must be >= 1");
        if (k > size()) throw std::invalid_argument("knn: k exceeds reference size");
        detail::KnnAccumulator acc(k, out);
        search(root_, query, acc);
        acc.finalize();
    }

    std::vector<KnnHit> knn(const Eigen::VectorXd& query, int k) const {
        if (query.size() != points_.cols())
            throw std::invalid_argument("knn: query dimension mismatch");
        std::vector<KnnHit> out;
        knn(query.data(), k, out);
        return out;
    }

    std::vector<KnnHit> knn(const Eigen::Vector3d& query, int k) const {
        if (points_.cols() != 3) throw std::invalid_argument("knn: query dimension mismatch");
        std::vector<KnnHit> out;
        knn(query.data(), k, out);
        return out;
    }

private:
    static constexpr int kLeafSize = 16;

    struct Node {
        int left = -1, right = -1;   // children; -1 on leaves
        int begin = 0, end = 0;      // order_ range for leaves
        int split_dim = 0;
        double split_val = 0.0;
    };

    int build(int begin, int end) {
        Node node;
        if (end - begin <= kLeafSize) {
            node.begin = begin;
            node.end = end;
            nodes_.push_back(node);
            return static_cast<int>(nodes_.size()) - 1;
        }
        // Split the widest dimension at its median.
        int best_dim = 0;
        double best_extent = -1.0;
        for (int d = 0; d < dim(); ++d) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (int i = begin; i < end; ++i) {
                const double v = points_(order_[static_cast<std::size_t>(i)], d);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > best_extent) {
                best_extent = hi - lo;
                best_dim = d;
            }
        }
        const int mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](int a, int b) {
                             const double va = points_(a, best_dim), vb = points_(b, best_dim);
                             return va < vb || (va == vb && a < b);
                         });
        node.split_dim = best_dim;
        node.split_val = points_(order_[static_cast<std::size_t>(mid)], best_dim);
        const int self = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        const int left = build(begin, mid);
        const int right = build(mid, end);
        nodes_[static_cast<std::size_t>(self)].left = left;
        nodes_[static_cast<std::size_t>(self)].right = right;
        return self;
    }

    void search(int node_id, const double* query, detail::KnnAccumulator& acc) const {
        const Node& node = nodes_[static_cast<std::size_t>(node_id)];
        if (node.left < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const int idx = order_[static_cast<std::size_t>(i)];
                acc.offer(idx, detail::squared_distance(query, points_.row(idx).data(), dim()));
            }
            return;
        }
        const double delta = query[node.split_dim] - node.split_val;
        const int near = delta < 0.0 ? node.left : node.right;
        const int far = delta < 0.0 ? node.right : node.left;
        search(near, query, acc);
        if (delta * delta <= acc.worst()) search(far, query, acc);
    }

    PointMatrix points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = 0;
};

/// Exact k-NN by linear scan; same distance arithmetic and tie rule as the
/// kd-tree. Preferred for high-dimensional (feature-space) queries where a
/// kd-tree cannot prune.
inline void scan_knn(const PointMatrix& refs, const double* query, int k,
                     std::vector<KnnHit>& out) {
    detail::KnnAccumulator acc(k, out);
    const int dim = static_cast<int>(refs.cols());
    for (int i = 0; i < refs.rows(); ++i) {
        acc.offer(i, detail::squared_distance(query, refs.row(i).data(), dim));
    }
    acc.finalize();
}

/**
 * Exact k nearest neighbors of each query among the reference points, by
 * Euclidean distance, sorted ascending with ties broken toward the lower
 * reference index. Dimensions up to 8 go through a kd-tree; higher
 * dimensions use a linear scan (identical results, no pruning benefit).
 */
inline std::vector<std::vector<KnnHit>> knn_search(const PointMatrix& queries,
                                                   const PointMatrix& refs, int k) {
    if (k < 1) throw std::invalid_argument("knn_search: k must be >= 1");
    if (refs.rows() < k) throw std::invalid_argument("knn_search: k exceeds reference size");
    if (queries.cols() != refs.cols())
        throw std::invalid_argument("knn_search: dimension mismatch");

    std::vector<std::vector<KnnHit>> result(static_cast<std::size_t>(queries.rows()));
    if (refs.cols() <= 8) {
        KdTree tree(refs);
        for (Eigen::Index i = 0; i < queries.rows(); ++i) {
            tree.knn(queries.row(i).data(), k, result[static_cast<std::size_t>(i)]);
        }
    } else {
        for (Eigen::Index i = 0; i < queries.rows(); ++i) {
            scan_knn(refs, queries.row(i).data(), k, result[static_cast<std::size_t>(i)]);
        }
    }
    return result;
}

inline std::vector<std::vector<KnnHit>> knn_search(const std::vector<Eigen::Vector3d>& queries,
                                                   const std::vector<Eigen::Vector3d>& refs,
                                                   int k) {
    return knn_search(to_matrix(queries), to_matrix(refs), k);
}

}  // namespace pcreg

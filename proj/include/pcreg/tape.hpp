#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "pcreg/encoder.hpp"

namespace pcreg {

/**
 * Reverse-mode autodiff over vector-valued nodes, recorded in evaluation
 * order. Supports the operations the losses need: parameter leaves, affine
 * layers slicing a flat parameter leaf, ReLU, L2 normalization, dot products,
 * and scalar arithmetic on 1-vectors.
 *
 * replay() recomputes every recorded value in order from the (possibly
 * mutated) leaf values, which gives finite differences an oracle that sees
 * exactly the recorded computation. A detach node is a gradient barrier AND
 * keeps its recorded value during replay: the detached value is a constant of
 * the graph, so finite differences on the replayed graph agree with the
 * analytic gradient even across stop-gradient cuts.
 */
class Tape {
public:
    int leaf(const Eigen::VectorXd& v) { return push(Op::leaf, -1, -1, v); }

    int constant(const Eigen::VectorXd& v) { return push(Op::constant, -1, -1, v); }

    int constant1(double v) { return constant(Eigen::VectorXd::Constant(1, v)); }

    int detach(int x) { return push(Op::detach, x, -1, nodes_[check(x)].value); }

    /// y = W x + b, where W (row-major out*in) and b live in the flat leaf
    /// `params` at the offsets of `layer` within `shapes`. Matches the
    /// arithmetic of encode_one exactly.
    int affine(int params, const std::vector<LayerShape>& shapes, int layer, int x) {
        const Node& p = nodes_[check(params)];
        if (p.op != Op::leaf) throw std::logic_error("tape: affine params must be a leaf");
        int w_off = 0;
        for (int l = 0; l < layer; ++l)
            w_off += shapes[static_cast<std::size_t>(l)].out * shapes[static_cast<std::size_t>(l)].in +
                     shapes[static_cast<std::size_t>(l)].out;
        const LayerShape s = shapes[static_cast<std::size_t>(layer)];
        if (nodes_[check(x)].value.size() != s.in)
            throw std::invalid_argument("tape: affine input dimension mismatch");
        if (p.value.size() < w_off + s.out * s.in + s.out)
            throw std::invalid_argument("tape: affine params leaf too small");
        const int id = push(Op::affine, params, x, Eigen::VectorXd());
        Node& n = nodes_[static_cast<std::size_t>(id)];
        n.w_off = w_off;
        n.out = s.out;
        n.in = s.in;
        n.value = affine_value(nodes_[static_cast<std::size_t>(params)], n);
        return id;
    }

    int relu(int x) {
        Eigen::VectorXd v = nodes_[check(x)].value;
        for (Eigen::Index i = 0; i < v.size(); ++i)
            if (v[i] < 0.0) v[i] = 0.0;
        return push(Op::relu, x, -1, std::move(v));
    }

    int l2norm(int x) {
        const Eigen::VectorXd& v = nodes_[check(x)].value;
        const double n = v.norm();
        return push(Op::l2norm, x, -1, n > 0.0 ? Eigen::VectorXd(v / n) : v);
    }

    int dot(int a, int b) {
        const Eigen::VectorXd& va = nodes_[check(a)].value;
        const Eigen::VectorXd& vb = nodes_[check(b)].value;
        if (va.size() != vb.size()) throw std::invalid_argument("tape: dot size mismatch");
        return push(Op::dot, a, b, Eigen::VectorXd::Constant(1, va.dot(vb)));
    }

    int add(int a, int b) {
        const Eigen::VectorXd& va = nodes_[check(a)].value;
        const Eigen::VectorXd& vb = nodes_[check(b)].value;
        if (va.size() != vb.size()) throw std::invalid_argument("tape: add size mismatch");
        return push(Op::add, a, b, va + vb);
    }

    int sub(int a, int b) {
        const Eigen::VectorXd& va = nodes_[check(a)].value;
        const Eigen::VectorXd& vb = nodes_[check(b)].value;
        if (va.size() != vb.size()) throw std::invalid_argument("tape: sub size mismatch");
        return push(Op::sub, a, b, va - vb);
    }

    int scale(int a, double c) {
        const int id = push(Op::scale, a, -1, nodes_[check(a)].value * c);
        nodes_[static_cast<std::size_t>(id)].factor = c;
        return id;
    }

    /// Elementwise quotient; used on scalar (1-vector) nodes.
    int div(int a, int b) {
        const Eigen::VectorXd& va = nodes_[check(a)].value;
        const Eigen::VectorXd& vb = nodes_[check(b)].value;
        if (va.size() != vb.size()) throw std::invalid_argument("tape: div size mismatch");
        return push(Op::div, a, b, va.cwiseQuotient(vb));
    }

    const Eigen::VectorXd& value(int id) const { return nodes_[check(id)].value; }

    double scalar(int id) const {
        const Eigen::VectorXd& v = nodes_[check(id)].value;
        if (v.size() != 1) throw std::logic_error("tape: node is not scalar");
        return v[0];
    }

    /// Leaf values may be mutated between replays; mutating any other node is
    /// an error since replay would overwrite it.
    Eigen::VectorXd& mutable_value(int id) {
        Node& n = nodes_[check(id)];
        if (n.op != Op::leaf) throw std::logic_error("tape: only leaves are mutable");
        return n.value;
    }

    /// Recomputes every non-leaf value in recording order. Constants and
    /// detach nodes keep their recorded values.
    void replay() {
        for (Node& n : nodes_) {
            switch (n.op) {
                case Op::leaf:
                case Op::constant:
                case Op::detach:
                    break;
                case Op::affine:
                    n.value = affine_value(nodes_[static_cast<std::size_t>(n.a)], n);
                    break;
                case Op::relu:
                    n.value = nodes_[static_cast<std::size_t>(n.a)].value;
                    for (Eigen::Index i = 0; i < n.value.size(); ++i)
                        if (n.value[i] < 0.0) n.value[i] = 0.0;
                    break;
                case Op::l2norm: {
                    const Eigen::VectorXd& v = nodes_[static_cast<std::size_t>(n.a)].value;
                    const double len = v.norm();
                    n.value = len > 0.0 ? Eigen::VectorXd(v / len) : v;
                    break;
                }
                case Op::dot:
                    n.value[0] = nodes_[static_cast<std::size_t>(n.a)].value.dot(
                        nodes_[static_cast<std::size_t>(n.b)].value);
                    break;
                case Op::add:
                    n.value = nodes_[static_cast<std::size_t>(n.a)].value +
                              nodes_[static_cast<std::size_t>(n.b)].value;
                    break;
                case Op::sub:
                    n.value = nodes_[static_cast<std::size_t>(n.a)].value -
                              nodes_[static_cast<std::size_t>(n.b)].value;
                    break;
                case Op::scale:
                    n.value = nodes_[static_cast<std::size_t>(n.a)].value * n.factor;
                    break;
                case Op::div:
                    n.value = nodes_[static_cast<std::size_t>(n.a)].value.cwiseQuotient(
                        nodes_[static_cast<std::size_t>(n.b)].value);
                    break;
            }
        }
    }

    double replay_scalar(int id) {
        replay();
        return scalar(id);
    }

    void zero_grad() {
        for (Node& n : nodes_) n.grad.setZero(n.value.size());
    }

    /// Reverse pass from a scalar node. Leaf gradients accumulate across
    /// calls (zero_grad resets them); non-leaf grad buffers are scratch,
    /// cleared on entry, so a later backward never re-propagates an earlier
    /// one. Detach nodes receive gradient but propagate none.
    void backward(int id) {
        const Node& seed = nodes_[check(id)];
        if (seed.value.size() != 1) throw std::logic_error("tape: backward needs a scalar");
        for (Node& n : nodes_) {
            if (n.op == Op::leaf) {
                if (n.grad.size() != n.value.size()) n.grad.setZero(n.value.size());
            } else {
                n.grad.setZero(n.value.size());
            }
        }
        nodes_[static_cast<std::size_t>(id)].grad[0] += 1.0;

        for (std::size_t i = nodes_.size(); i > 0; --i) {
            Node& n = nodes_[i - 1];
            if (static_cast<int>(i - 1) > id || n.grad.isZero(0.0)) continue;
            switch (n.op) {
                case Op::leaf:
                case Op::constant:
                case Op::detach:
                    break;
                case Op::affine: {
                    Node& p = nodes_[static_cast<std::size_t>(n.a)];
                    Node& x = nodes_[static_cast<std::size_t>(n.b)];
                    using RowMat =
                        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
                    Eigen::Map<const RowMat> w(p.value.data() + n.w_off, n.out, n.in);
                    x.grad.noalias() += w.transpose() * n.grad;
                    Eigen::Map<RowMat> gw(p.grad.data() + n.w_off, n.out, n.in);
                    gw.noalias() += n.grad * x.value.transpose();
                    p.grad.segment(n.w_off + n.out * n.in, n.out) += n.grad;
                    break;
                }
                case Op::relu: {
                    Node& x = nodes_[static_cast<std::size_t>(n.a)];
                    for (Eigen::Index j = 0; j < n.grad.size(); ++j)
                        if (x.value[j] > 0.0) x.grad[j] += n.grad[j];
                    break;
                }
                case Op::l2norm: {
                    Node& x = nodes_[static_cast<std::size_t>(n.a)];
                    const double len = x.value.norm();
                    if (len > 0.0) {
                        const double along = n.value.dot(n.grad);
                        x.grad += (n.grad - n.value * along) / len;
                    } else {
                        x.grad += n.grad;
                    }
                    break;
                }
                case Op::dot: {
                    Node& a = nodes_[static_cast<std::size_t>(n.a)];
                    Node& b = nodes_[static_cast<std::size_t>(n.b)];
                    a.grad += n.grad[0] * b.value;
                    b.grad += n.grad[0] * a.value;
                    break;
                }
                case Op::add:
                    nodes_[static_cast<std::size_t>(n.a)].grad += n.grad;
                    nodes_[static_cast<std::size_t>(n.b)].grad += n.grad;
                    break;
                case Op::sub:
                    nodes_[static_cast<std::size_t>(n.a)].grad += n.grad;
                    nodes_[static_cast<std::size_t>(n.b)].grad -= n.grad;
                    break;
                case Op::scale:
                    nodes_[static_cast<std::size_t>(n.a)].grad += n.grad * n.factor;
                    break;
                case Op::div: {
                    Node& a = nodes_[static_cast<std::size_t>(n.a)];
                    Node& b = nodes_[static_cast<std::size_t>(n.b)];
                    a.grad += n.grad.cwiseQuotient(b.value);
                    b.grad -= n.grad.cwiseProduct(n.value).cwiseQuotient(b.value);
                    break;
                }
            }
        }
    }

    const Eigen::VectorXd& grad(int id) const { return nodes_[check(id)].grad; }

    int size() const { return static_cast<int>(nodes_.size()); }

private:
    enum class Op { leaf, constant, detach, affine, relu, l2norm, dot, add, sub, scale, div };

    struct Node {
        Op op;
        int a = -1, b = -1;
        int w_off = 0, out = 0, in = 0;
        double factor = 0.0;
        Eigen::VectorXd value;
        Eigen::VectorXd grad;
    };

    Eigen::VectorXd affine_value(const Node& params, const Node& n) const {
        using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        Eigen::Map<const RowMat> w(params.value.data() + n.w_off, n.out, n.in);
        Eigen::Map<const Eigen::VectorXd> b(params.value.data() + n.w_off + n.out * n.in, n.out);
        const Eigen::VectorXd& x = nodes_[static_cast<std::size_t>(n.b)].value;
        return w * x + b;
    }

    int push(Op op, int a, int b, Eigen::VectorXd v) {
        Node n;
        n.op = op;
        n.a = a;
        n.b = b;
        n.value = std::move(v);
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    std::size_t check(int id) const {
        if (id < 0 || id >= static_cast<int>(nodes_.size()))
            throw std::logic_error("tape: node id out of range");
        return static_cast<std::size_t>(id);
    }

    std::vector<Node> nodes_;
};

}  // namespace pcreg

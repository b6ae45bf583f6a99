#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "omt/core/tensor.hpp"

namespace omt {

// Reverse-mode differentiation tape over real tensors. A graph is built by
// value; backward() walks the recorded nodes in reverse and accumulates
// exact adjoints. Complex quantities are carried as (re, im) node pairs via
// the CVar helpers at the bottom.
//
// Gradients are only computed for nodes transitively built from leaves
// created with needs_grad = true, so constants cost nothing in backward.

struct Var {
    int id = -1;
};

class Tape {
public:
    enum class Op {
        leaf,
        add,
        sub,
        mul,
        neg,
        smul,       // x * attr
        sadd,       // x + attr
        sum,        // total -> scalar
        sqrt_eps,   // sqrt(x + attr) elementwise
        recip_eps,  // 1 / (x + attr) elementwise
        matmul,     // [m,k] x [k,n]
        transpose,  // [m,n] -> [n,m]
        conv1dp,    // x[B,Cin,n], W[Cout,Cin,w], b[Cout]
        conv2dp,    // x[B,Cin,H,W], W[Cout,Cin,w,w], b[Cout], stride
        lrelu,
        tanh_op,
        sin_op,
        cos_op,
        exp_op,
        softmax_rows, // [R,C] row-wise
        concat1,      // rank-3 tensors along axis 1
        reshape,
        slice0,     // x[lo:hi] along axis 0
        rowscale,   // x[R,C] * s[R]
        addrow,     // x[R,C] + b[C]
        sym_perm,   // 0.5 * (x + sign * x[perm])
    };

    Var leaf(const std::vector<std::size_t>& shape, const std::vector<double>& values,
             bool needs_grad) {
        if (detail::shape_product(shape) != values.size())
            throw std::invalid_argument("tape: leaf data does not match shape");
        Node nd;
        nd.op = Op::leaf;
        nd.shape = shape;
        nd.val = values;
        nd.needs_grad = needs_grad;
        return push(std::move(nd));
    }

    Var leaf(const RTensor& t, bool needs_grad) { return leaf(t.shape(), t.raw(), needs_grad); }

    Var constant(const std::vector<std::size_t>& shape, const std::vector<double>& values) {
        return leaf(shape, values, false);
    }

    Var scalar(double v) { return constant({1}, {v}); }

    Var add(Var a, Var b) { return binary(Op::add, a, b); }
    Var sub(Var a, Var b) { return binary(Op::sub, a, b); }
    Var mul(Var a, Var b) { return binary(Op::mul, a, b); }

    Var neg(Var a) {
        Node nd = unary_like(Op::neg, a);
        for (std::size_t i = 0; i < nd.val.size(); ++i) nd.val[i] = -at(a).val[i];
        return push(std::move(nd));
    }

    Var smul(Var a, double s) {
        Node nd = unary_like(Op::smul, a);
        nd.attr = s;
        for (std::size_t i = 0; i < nd.val.size(); ++i) nd.val[i] = s * at(a).val[i];
        return push(std::move(nd));
    }

    Var sadd(Var a, double s) {
        Node nd = unary_like(Op::sadd, a);
        nd.attr = s;
        for (std::size_t i = 0; i < nd.val.size(); ++i) nd.val[i] = s + at(a).val[i];
        return push(std::move(nd));
    }

    Var sum(Var a) {
        Node nd;
        nd.op = Op::sum;
        nd.a = a.id;
        nd.shape = {1};
        double acc = 0;
        for (double v : at(a).val) acc += v;
        nd.val = {acc};
        nd.needs_grad = at(a).needs_grad;
        return push(std::move(nd));
    }

    Var sqrt_eps(Var a, double eps) {
        Node nd = unary_like(Op::sqrt_eps, a);
        nd.attr = eps;
        for (std::size_t i = 0; i < nd.val.size(); ++i) nd.val[i] = std::sqrt(at(a).val[i] + eps);
        return push(std::move(nd));
    }

    Var recip_eps(Var a, double eps) {
        Node nd = unary_like(Op::recip_eps, a);
        nd.attr = eps;
        for (std::size_t i = 0; i < nd.val.size(); ++i) nd.val[i] = 1.0 / (at(a).val[i] + eps);
        return push(std::move(nd));
    }

    Var lrelu(Var a, double alpha = 0.02) {
        Node nd = unary_like(Op::lrelu, a);
        nd.attr = alpha;
        for (std::size_t i = 0; i < nd.val.size(); ++i) {
            double x = at(a).val[i];
            nd.val[i] = x > 0 ? x : alpha * x;
        }
        return push(std::move(nd));
    }

    Var tanh_(Var a) {
        Node nd = unary_like(Op::tanh_op, a);
        for (std::size_t i = 0; i < nd.val.size(); ++i) nd.val[i] = std::tanh(at(a).val[i]);
        return push(std::move(nd));
    }

    Var sin_(Var a) {
        Node nd = unary_like(Op::sin_op, a);
        for (std::size_t i = 0; i < nd.val.size(); ++i) nd.val[i] = std::sin(at(a).val[i]);
        return push(std::move(nd));
    }

    Var cos_(Var a) {
        Node nd = unary_like(Op::cos_op, a);
        for (std::size_t i = 0; i < nd.val.size(); ++i) nd.val[i] = std::cos(at(a).val[i]);
        return push(std::move(nd));
    }

    Var exp_(Var a) {
        Node nd = unary_like(Op::exp_op, a);
        for (std::size_t i = 0; i < nd.val.size(); ++i) nd.val[i] = std::exp(at(a).val[i]);
        return push(std::move(nd));
    }

    Var matmul(Var a, Var b) {
        const Node& A = at(a);
        const Node& B = at(b);
        if (A.shape.size() != 2 || B.shape.size() != 2 || A.shape[1] != B.shape[0])
            throw std::invalid_argument("tape: matmul shape mismatch");
        const std::size_t m = A.shape[0], k = A.shape[1], n = B.shape[1];
        Node nd;
        nd.op = Op::matmul;
        nd.a = a.id;
        nd.b = b.id;
        nd.shape = {m, n};
        nd.val.assign(m * n, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t t = 0; t < k; ++t) {
                double av = A.val[i * k + t];
                if (av == 0) continue;
                const double* brow = B.val.data() + t * n;
                double* crow = nd.val.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        nd.needs_grad = A.needs_grad || B.needs_grad;
        return push(std::move(nd));
    }

    Var transpose(Var a) {
        const Node& A = at(a);
        if (A.shape.size() != 2) throw std::invalid_argument("tape: transpose needs rank 2");
        Node nd;
        nd.op = Op::transpose;
        nd.a = a.id;
        nd.shape = {A.shape[1], A.shape[0]};
        nd.val.resize(A.val.size());
        for (std::size_t i = 0; i < A.shape[0]; ++i)
            for (std::size_t j = 0; j < A.shape[1]; ++j)
                nd.val[j * A.shape[0] + i] = A.val[i * A.shape[1] + j];
        nd.needs_grad = A.needs_grad;
        return push(std::move(nd));
    }

    /// Periodic 1D convolution: x[B,Cin,n] * W[Cout,Cin,w] + b[Cout].
    Var conv1dp(Var x, Var w, Var b) {
        const Node& X = at(x);
        const Node& W = at(w);
        const Node& Bb = at(b);
        if (X.shape.size() != 3 || W.shape.size() != 3 || Bb.shape.size() != 1)
            throw std::invalid_argument("tape: conv1dp rank mismatch");
        if (W.shape[1] != X.shape[1] || Bb.shape[0] != W.shape[0] || W.shape[2] % 2 == 0)
            throw std::invalid_argument("tape: conv1dp shape mismatch");
        const std::size_t B = X.shape[0], Cin = X.shape[1], n = X.shape[2];
        const std::size_t Cout = W.shape[0], win = W.shape[2];
        const std::size_t hw = win / 2;
        if (hw >= n) throw std::invalid_argument("tape: conv1dp window exceeds signal length");
        Node nd;
        nd.op = Op::conv1dp;
        nd.a = x.id;
        nd.b = w.id;
        nd.c = b.id;
        nd.shape = {B, Cout, n};
        nd.val.assign(B * Cout * n, 0.0);
        for (std::size_t s = 0; s < B; ++s)
            for (std::size_t o = 0; o < Cout; ++o) {
                double* yrow = nd.val.data() + (s * Cout + o) * n;
                for (std::size_t t = 0; t < n; ++t) yrow[t] = Bb.val[o];
                for (std::size_t i = 0; i < Cin; ++i) {
                    const double* xrow = X.val.data() + (s * Cin + i) * n;
                    const double* wrow = W.val.data() + (o * Cin + i) * win;
                    for (std::size_t d = 0; d < win; ++d) {
                        double wv = wrow[d];
                        if (wv == 0) continue;
                        // y[t] += w[d] * x[(t + d - hw) mod n]
                        std::size_t off = (d + n - hw) % n;
                        for (std::size_t t = 0; t < n; ++t) {
                            std::size_t src = t + off;
                            if (src >= n) src -= n;
                            yrow[t] += wv * xrow[src];
                        }
                    }
                }
            }
        nd.needs_grad = X.needs_grad || W.needs_grad || Bb.needs_grad;
        return push(std::move(nd));
    }

    /// Periodic strided 2D convolution: x[B,Cin,H,W] * W[Cout,Cin,w,w] + b.
    /// stride must divide both spatial extents.
    Var conv2dp(Var x, Var w, Var b, std::size_t stride = 1) {
        const Node& X = at(x);
        const Node& W = at(w);
        const Node& Bb = at(b);
        if (X.shape.size() != 4 || W.shape.size() != 4 || Bb.shape.size() != 1)
            throw std::invalid_argument("tape: conv2dp rank mismatch");
        if (W.shape[1] != X.shape[1] || Bb.shape[0] != W.shape[0] || W.shape[2] != W.shape[3] ||
            W.shape[2] % 2 == 0)
            throw std::invalid_argument("tape: conv2dp shape mismatch");
        const std::size_t B = X.shape[0], Cin = X.shape[1], H = X.shape[2], Wd = X.shape[3];
        if (stride == 0 || H % stride || Wd % stride)
            throw std::invalid_argument("tape: conv2dp stride must divide extent");
        const std::size_t Cout = W.shape[0], win = W.shape[2], hw = win / 2;
        if (hw >= H || hw >= Wd)
            throw std::invalid_argument("tape: conv2dp window exceeds image extent");
        const std::size_t Ho = H / stride, Wo = Wd / stride;
        Node nd;
        nd.op = Op::conv2dp;
        nd.a = x.id;
        nd.b = w.id;
        nd.c = b.id;
        nd.stride = stride;
        nd.shape = {B, Cout, Ho, Wo};
        nd.val.assign(B * Cout * Ho * Wo, 0.0);
        for (std::size_t s = 0; s < B; ++s)
            for (std::size_t o = 0; o < Cout; ++o)
                for (std::size_t p = 0; p < Ho; ++p)
                    for (std::size_t q = 0; q < Wo; ++q) {
                        double acc = Bb.val[o];
                        for (std::size_t i = 0; i < Cin; ++i) {
                            const double* xim = X.val.data() + (s * Cin + i) * H * Wd;
                            const double* wker = W.val.data() + (o * Cin + i) * win * win;
                            for (std::size_t da = 0; da < win; ++da) {
                                std::size_t r = (p * stride + da + H - hw) % H;
                                for (std::size_t db = 0; db < win; ++db) {
                                    std::size_t cl = (q * stride + db + Wd - hw) % Wd;
                                    acc += wker[da * win + db] * xim[r * Wd + cl];
                                }
                            }
                        }
                        nd.val[((s * Cout + o) * Ho + p) * Wo + q] = acc;
                    }
        nd.needs_grad = X.needs_grad || W.needs_grad || Bb.needs_grad;
        return push(std::move(nd));
    }

    Var softmax_rows(Var a) {
        const Node& A = at(a);
        if (A.shape.size() != 2) throw std::invalid_argument("tape: softmax needs rank 2");
        const std::size_t R = A.shape[0], C = A.shape[1];
        Node nd;
        nd.op = Op::softmax_rows;
        nd.a = a.id;
        nd.shape = A.shape;
        nd.val.resize(A.val.size());
        for (std::size_t r = 0; r < R; ++r) {
            const double* x = A.val.data() + r * C;
            double* y = nd.val.data() + r * C;
            double mx = x[0];
            for (std::size_t j = 1; j < C; ++j) mx = std::max(mx, x[j]);
            double z = 0;
            for (std::size_t j = 0; j < C; ++j) {
                y[j] = std::exp(x[j] - mx);
                z += y[j];
            }
            for (std::size_t j = 0; j < C; ++j) y[j] /= z;
        }
        nd.needs_grad = A.needs_grad;
        return push(std::move(nd));
    }

    /// Concatenate rank-3 tensors [B,C_i,n] along the channel axis.
    Var concat1(const std::vector<Var>& parts) {
        if (parts.empty()) throw std::invalid_argument("tape: empty concat");
        const Node& first = at(parts[0]);
        if (first.shape.size() != 3) throw std::invalid_argument("tape: concat1 needs rank 3");
        std::size_t B = first.shape[0], n = first.shape[2], ctot = 0;
        for (Var p : parts) {
            const Node& P = at(p);
            if (P.shape.size() != 3 || P.shape[0] != B || P.shape[2] != n)
                throw std::invalid_argument("tape: concat1 shape mismatch");
            ctot += P.shape[1];
        }
        Node nd;
        nd.op = Op::concat1;
        nd.shape = {B, ctot, n};
        nd.val.resize(B * ctot * n);
        nd.needs_grad = false;
        for (Var p : parts) {
            nd.list.push_back(p.id);
            nd.needs_grad = nd.needs_grad || at(p).needs_grad;
        }
        for (std::size_t s = 0; s < B; ++s) {
            std::size_t coff = 0;
            for (Var p : parts) {
                const Node& P = at(p);
                std::size_t pc = P.shape[1];
                std::copy(P.val.begin() + long(s * pc * n), P.val.begin() + long((s + 1) * pc * n),
                          nd.val.begin() + long((s * ctot + coff) * n));
                coff += pc;
            }
        }
        return push(std::move(nd));
    }

    Var reshape(Var a, const std::vector<std::size_t>& shape) {
        const Node& A = at(a);
        if (detail::shape_product(shape) != A.val.size())
            throw std::invalid_argument("tape: reshape size mismatch");
        Node nd;
        nd.op = Op::reshape;
        nd.a = a.id;
        nd.shape = shape;
        nd.val = A.val;
        nd.needs_grad = A.needs_grad;
        return push(std::move(nd));
    }

    /// Contiguous range [lo, hi) along axis 0.
    Var slice0(Var a, std::size_t lo, std::size_t hi) {
        const Node& A = at(a);
        if (A.shape.empty() || lo >= hi || hi > A.shape[0])
            throw std::invalid_argument("tape: slice0 range out of bounds");
        std::size_t inner = A.val.size() / A.shape[0];
        Node nd;
        nd.op = Op::slice0;
        nd.a = a.id;
        nd.shape = A.shape;
        nd.shape[0] = hi - lo;
        nd.stride = lo;
        nd.val.assign(A.val.begin() + long(lo * inner), A.val.begin() + long(hi * inner));
        nd.needs_grad = A.needs_grad;
        return push(std::move(nd));
    }

    /// Scale row r of x[R,C] by s[r].
    Var rowscale(Var x, Var s) {
        const Node& X = at(x);
        const Node& S = at(s);
        if (X.shape.size() != 2 || S.val.size() != X.shape[0])
            throw std::invalid_argument("tape: rowscale shape mismatch");
        Node nd;
        nd.op = Op::rowscale;
        nd.a = x.id;
        nd.b = s.id;
        nd.shape = X.shape;
        nd.val.resize(X.val.size());
        const std::size_t R = X.shape[0], C = X.shape[1];
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c) nd.val[r * C + c] = X.val[r * C + c] * S.val[r];
        nd.needs_grad = X.needs_grad || S.needs_grad;
        return push(std::move(nd));
    }

    /// Add a bias row to every row of x[R,C].
    Var addrow(Var x, Var b) {
        const Node& X = at(x);
        const Node& Bb = at(b);
        if (X.shape.size() != 2 || Bb.val.size() != X.shape[1])
            throw std::invalid_argument("tape: addrow shape mismatch");
        Node nd;
        nd.op = Op::addrow;
        nd.a = x.id;
        nd.b = b.id;
        nd.shape = X.shape;
        nd.val.resize(X.val.size());
        const std::size_t R = X.shape[0], C = X.shape[1];
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c) nd.val[r * C + c] = X.val[r * C + c] + Bb.val[c];
        nd.needs_grad = X.needs_grad || Bb.needs_grad;
        return push(std::move(nd));
    }

    /// 0.5 * (x + sign * x[perm]); perm must be an involution. Used to force
    /// exact conjugate symmetry while reusing already-computed values.
    Var sym_perm(Var x, const std::vector<std::size_t>& perm, double sign) {
        const Node& X = at(x);
        if (perm.size() != X.val.size())
            throw std::invalid_argument("tape: sym_perm permutation size mismatch");
        Node nd;
        nd.op = Op::sym_perm;
        nd.a = x.id;
        nd.shape = X.shape;
        nd.perm = perm;
        nd.attr = sign;
        nd.val.resize(X.val.size());
        for (std::size_t i = 0; i < X.val.size(); ++i)
            nd.val[i] = 0.5 * (X.val[i] + sign * X.val[perm[i]]);
        nd.needs_grad = X.needs_grad;
        return push(std::move(nd));
    }

    const std::vector<double>& value(Var v) const { return at(v).val; }
    const std::vector<std::size_t>& shape(Var v) const { return at(v).shape; }

    const std::vector<double>& grad(Var v) const {
        const Node& nd = at(v);
        if (nd.grad.empty()) throw std::logic_error("tape: no gradient recorded for node");
        return nd.grad;
    }

    /// Reverse sweep from a real scalar loss node.
    void backward(Var loss) {
        Node& L = nodes_.at(std::size_t(loss.id));
        if (L.val.size() != 1) throw std::invalid_argument("tape: loss must be scalar");
        for (Node& nd : nodes_) {
            nd.grad.clear();
            if (nd.needs_grad) nd.grad.assign(nd.val.size(), 0.0);
        }
        if (!L.needs_grad) return; // loss independent of every parameter
        L.grad[0] = 1.0;
        for (int id = loss.id; id >= 0; --id) {
            Node& nd = nodes_[std::size_t(id)];
            if (!nd.needs_grad || nd.grad.empty()) continue;
            pull(nd);
        }
    }

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    struct Node {
        Op op = Op::leaf;
        int a = -1, b = -1, c = -1;
        std::vector<int> list;
        std::vector<std::size_t> shape;
        std::vector<double> val;
        std::vector<double> grad;
        std::vector<std::size_t> perm;
        double attr = 0;
        std::size_t stride = 1;
        bool needs_grad = false;
    };

    std::vector<Node> nodes_;

    const Node& at(Var v) const { return nodes_.at(std::size_t(v.id)); }
    Node& at(Var v) { return nodes_.at(std::size_t(v.id)); }

    Var push(Node&& nd) {
        nodes_.push_back(std::move(nd));
        return Var{int(nodes_.size() - 1)};
    }

    Node unary_like(Op op, Var a) {
        Node nd;
        nd.op = op;
        nd.a = a.id;
        nd.shape = at(a).shape;
        nd.val.resize(at(a).val.size());
        nd.needs_grad = at(a).needs_grad;
        return nd;
    }

    Var binary(Op op, Var a, Var b) {
        const Node& A = at(a);
        const Node& B = at(b);
        if (A.shape != B.shape) throw std::invalid_argument("tape: elementwise shape mismatch");
        Node nd;
        nd.op = op;
        nd.a = a.id;
        nd.b = b.id;
        nd.shape = A.shape;
        nd.val.resize(A.val.size());
        for (std::size_t i = 0; i < nd.val.size(); ++i) {
            switch (op) {
                case Op::add: nd.val[i] = A.val[i] + B.val[i]; break;
                case Op::sub: nd.val[i] = A.val[i] - B.val[i]; break;
                case Op::mul: nd.val[i] = A.val[i] * B.val[i]; break;
                default: throw std::logic_error("tape: bad binary op");
            }
        }
        nd.needs_grad = A.needs_grad || B.needs_grad;
        return push(std::move(nd));
    }

    static void axpy(std::vector<double>& dst, const std::vector<double>& src, double s = 1.0) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
    }

    bool wants(int id) const { return id >= 0 && nodes_[std::size_t(id)].needs_grad; }

    void pull(Node& nd) {
        auto& g = nd.grad;
        switch (nd.op) {
            case Op::leaf: break;
            case Op::add: {
                if (wants(nd.a)) axpy(nodes_[nd.a].grad, g);
                if (wants(nd.b)) axpy(nodes_[nd.b].grad, g);
                break;
            }
            case Op::sub: {
                if (wants(nd.a)) axpy(nodes_[nd.a].grad, g);
                if (wants(nd.b)) axpy(nodes_[nd.b].grad, g, -1.0);
                break;
            }
            case Op::mul: {
                if (wants(nd.a)) {
                    auto& da = nodes_[nd.a].grad;
                    const auto& bv = nodes_[nd.b].val;
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv[i];
                }
                if (wants(nd.b)) {
                    auto& db = nodes_[nd.b].grad;
                    const auto& av = nodes_[nd.a].val;
                    for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * av[i];
                }
                break;
            }
            case Op::neg:
                if (wants(nd.a)) axpy(nodes_[nd.a].grad, g, -1.0);
                break;
            case Op::smul:
                if (wants(nd.a)) axpy(nodes_[nd.a].grad, g, nd.attr);
                break;
            case Op::sadd:
                if (wants(nd.a)) axpy(nodes_[nd.a].grad, g);
                break;
            case Op::sum: {
                if (wants(nd.a)) {
                    auto& da = nodes_[nd.a].grad;
                    for (double& d : da) d += g[0];
                }
                break;
            }
            case Op::sqrt_eps: {
                if (wants(nd.a)) {
                    auto& da = nodes_[nd.a].grad;
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * 0.5 / nd.val[i];
                }
                break;
            }
            case Op::recip_eps: {
                if (wants(nd.a)) {
                    auto& da = nodes_[nd.a].grad;
                    for (std::size_t i = 0; i < g.size(); ++i)
                        da[i] -= g[i] * nd.val[i] * nd.val[i];
                }
                break;
            }
            case Op::matmul: {
                const Node& A = nodes_[nd.a];
                const Node& B = nodes_[nd.b];
                const std::size_t m = A.shape[0], k = A.shape[1], n = B.shape[1];
                if (wants(nd.a)) {
                    auto& da = nodes_[nd.a].grad;
                    // dA[i,t] = sum_j dC[i,j] * B[t,j]: dot products over contiguous rows
                    for (std::size_t i = 0; i < m; ++i) {
                        const double* grow = g.data() + i * n;
                        double* darow = da.data() + i * k;
                        for (std::size_t t = 0; t < k; ++t) {
                            const double* brow = B.val.data() + t * n;
                            double acc = 0;
                            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                            darow[t] += acc;
                        }
                    }
                }
                if (wants(nd.b)) {
                    auto& db = nodes_[nd.b].grad;
                    // dB = A^T * dC
                    for (std::size_t t = 0; t < k; ++t)
                        for (std::size_t i = 0; i < m; ++i) {
                            double av = A.val[i * k + t];
                            if (av == 0) continue;
                            const double* grow = g.data() + i * n;
                            double* dbrow = db.data() + t * n;
                            for (std::size_t j = 0; j < n; ++j) dbrow[j] += av * grow[j];
                        }
                }
                break;
            }
            case Op::transpose: {
                if (wants(nd.a)) {
                    auto& da = nodes_[nd.a].grad;
                    const std::size_t r = nd.shape[0], c = nd.shape[1];
                    for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < c; ++j) da[j * r + i] += g[i * c + j];
                }
                break;
            }
            case Op::conv1dp: {
                const Node& X = nodes_[nd.a];
                const Node& W = nodes_[nd.b];
                const std::size_t B = X.shape[0], Cin = X.shape[1], n = X.shape[2];
                const std::size_t Cout = W.shape[0], win = W.shape[2], hw = win / 2;
                for (std::size_t s = 0; s < B; ++s)
                    for (std::size_t o = 0; o < Cout; ++o) {
                        const double* grow = g.data() + (s * Cout + o) * n;
                        if (wants(nd.c)) {
                            double acc = 0;
                            for (std::size_t t = 0; t < n; ++t) acc += grow[t];
                            nodes_[nd.c].grad[o] += acc;
                        }
                        for (std::size_t i = 0; i < Cin; ++i) {
                            const double* xrow = X.val.data() + (s * Cin + i) * n;
                            const double* wrow = W.val.data() + (o * Cin + i) * win;
                            double* dwrow =
                                wants(nd.b) ? nodes_[nd.b].grad.data() + (o * Cin + i) * win
                                            : nullptr;
                            double* dxrow =
                                wants(nd.a) ? nodes_[nd.a].grad.data() + (s * Cin + i) * n
                                            : nullptr;
                            for (std::size_t d = 0; d < win; ++d) {
                                std::size_t off = (d + n - hw) % n;
                                double wacc = 0;
                                for (std::size_t t = 0; t < n; ++t) {
                                    std::size_t src = t + off;
                                    if (src >= n) src -= n;
                                    if (dwrow) wacc += grow[t] * xrow[src];
                                    if (dxrow) dxrow[src] += grow[t] * wrow[d];
                                }
                                if (dwrow) dwrow[d] += wacc;
                            }
                        }
                    }
                break;
            }
            case Op::conv2dp: {
                const Node& X = nodes_[nd.a];
                const Node& W = nodes_[nd.b];
                const std::size_t B = X.shape[0], Cin = X.shape[1], H = X.shape[2],
                                  Wd = X.shape[3];
                const std::size_t Cout = W.shape[0], win = W.shape[2], hw = win / 2;
                const std::size_t Ho = nd.shape[2], Wo = nd.shape[3], st = nd.stride;
                for (std::size_t s = 0; s < B; ++s)
                    for (std::size_t o = 0; o < Cout; ++o)
                        for (std::size_t p = 0; p < Ho; ++p)
                            for (std::size_t q = 0; q < Wo; ++q) {
                                double gv = g[((s * Cout + o) * Ho + p) * Wo + q];
                                if (gv == 0) continue;
                                if (wants(nd.c)) nodes_[nd.c].grad[o] += gv;
                                for (std::size_t i = 0; i < Cin; ++i) {
                                    const double* xim = X.val.data() + (s * Cin + i) * H * Wd;
                                    const double* wker =
                                        W.val.data() + (o * Cin + i) * win * win;
                                    double* dxim = wants(nd.a) ? nodes_[nd.a].grad.data() +
                                                                     (s * Cin + i) * H * Wd
                                                               : nullptr;
                                    double* dwker = wants(nd.b) ? nodes_[nd.b].grad.data() +
                                                                      (o * Cin + i) * win * win
                                                                : nullptr;
                                    for (std::size_t da = 0; da < win; ++da) {
                                        std::size_t r = (p * st + da + H - hw) % H;
                                        for (std::size_t db = 0; db < win; ++db) {
                                            std::size_t cl = (q * st + db + Wd - hw) % Wd;
                                            if (dwker)
                                                dwker[da * win + db] += gv * xim[r * Wd + cl];
                                            if (dxim)
                                                dxim[r * Wd + cl] += gv * wker[da * win + db];
                                        }
                                    }
                                }
                            }
                break;
            }
            case Op::lrelu: {
                if (wants(nd.a)) {
                    const auto& xv = nodes_[nd.a].val;
                    auto& da = nodes_[nd.a].grad;
                    for (std::size_t i = 0; i < g.size(); ++i)
                        da[i] += g[i] * (xv[i] > 0 ? 1.0 : nd.attr);
                }
                break;
            }
            case Op::tanh_op: {
                if (wants(nd.a)) {
                    auto& da = nodes_[nd.a].grad;
                    for (std::size_t i = 0; i < g.size(); ++i)
                        da[i] += g[i] * (1.0 - nd.val[i] * nd.val[i]);
                }
                break;
            }
            case Op::sin_op: {
                if (wants(nd.a)) {
                    const auto& xv = nodes_[nd.a].val;
                    auto& da = nodes_[nd.a].grad;
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * std::cos(xv[i]);
                }
                break;
            }
            case Op::cos_op: {
                if (wants(nd.a)) {
                    const auto& xv = nodes_[nd.a].val;
                    auto& da = nodes_[nd.a].grad;
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] -= g[i] * std::sin(xv[i]);
                }
                break;
            }
            case Op::exp_op: {
                if (wants(nd.a)) {
                    auto& da = nodes_[nd.a].grad;
                    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * nd.val[i];
                }
                break;
            }
            case Op::softmax_rows: {
                if (wants(nd.a)) {
                    auto& da = nodes_[nd.a].grad;
                    const std::size_t R = nd.shape[0], C = nd.shape[1];
                    for (std::size_t r = 0; r < R; ++r) {
                        const double* y = nd.val.data() + r * C;
                        const double* gy = g.data() + r * C;
                        double dot = 0;
                        for (std::size_t j = 0; j < C; ++j) dot += gy[j] * y[j];
                        for (std::size_t j = 0; j < C; ++j)
                            da[r * C + j] += y[j] * (gy[j] - dot);
                    }
                }
                break;
            }
            case Op::concat1: {
                const std::size_t B = nd.shape[0], ctot = nd.shape[1], n = nd.shape[2];
                for (std::size_t s = 0; s < B; ++s) {
                    std::size_t coff = 0;
                    for (int pid : nd.list) {
                        Node& P = nodes_[std::size_t(pid)];
                        std::size_t pc = P.shape[1];
                        if (P.needs_grad)
                            for (std::size_t i = 0; i < pc * n; ++i)
                                P.grad[s * pc * n + i] += g[(s * ctot + coff) * n + i];
                        coff += pc;
                    }
                }
                break;
            }
            case Op::reshape:
                if (wants(nd.a)) axpy(nodes_[nd.a].grad, g);
                break;
            case Op::slice0: {
                if (wants(nd.a)) {
                    auto& da = nodes_[nd.a].grad;
                    const Node& A = nodes_[nd.a];
                    std::size_t inner = A.val.size() / A.shape[0];
                    for (std::size_t i = 0; i < g.size(); ++i)
                        da[nd.stride * inner + i] += g[i];
                }
                break;
            }
            case Op::rowscale: {
                const Node& X = nodes_[nd.a];
                const Node& S = nodes_[nd.b];
                const std::size_t R = X.shape[0], C = X.shape[1];
                if (wants(nd.a)) {
                    auto& dx = nodes_[nd.a].grad;
                    for (std::size_t r = 0; r < R; ++r)
                        for (std::size_t c2 = 0; c2 < C; ++c2)
                            dx[r * C + c2] += g[r * C + c2] * S.val[r];
                }
                if (wants(nd.b)) {
                    auto& ds = nodes_[nd.b].grad;
                    for (std::size_t r = 0; r < R; ++r) {
                        double acc = 0;
                        for (std::size_t c2 = 0; c2 < C; ++c2)
                            acc += g[r * C + c2] * X.val[r * C + c2];
                        ds[r] += acc;
                    }
                }
                break;
            }
            case Op::addrow: {
                const std::size_t R = nd.shape[0], C = nd.shape[1];
                if (wants(nd.a)) axpy(nodes_[nd.a].grad, g);
                if (wants(nd.b)) {
                    auto& db = nodes_[nd.b].grad;
                    for (std::size_t r = 0; r < R; ++r)
                        for (std::size_t c2 = 0; c2 < C; ++c2) db[c2] += g[r * C + c2];
                }
                break;
            }
            case Op::sym_perm: {
                if (wants(nd.a)) {
                    auto& da = nodes_[nd.a].grad;
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        da[i] += 0.5 * g[i];
                        da[nd.perm[i]] += 0.5 * nd.attr * g[i];
                    }
                }
                break;
            }
        }
    }
};

// Complex values on the tape: a pair of equally-shaped real nodes.

struct CVar {
    Var re, im;
};

inline CVar cleaf(Tape& t, const CTensor& x, bool needs_grad) {
    std::vector<double> re(x.size()), im(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        re[i] = x[i].real();
        im[i] = x[i].imag();
    }
    return {t.leaf(x.shape(), re, needs_grad), t.leaf(x.shape(), im, needs_grad)};
}

inline CVar cconst(Tape& t, const CTensor& x) { return cleaf(t, x, false); }

inline CVar cadd(Tape& t, CVar a, CVar b) { return {t.add(a.re, b.re), t.add(a.im, b.im)}; }
inline CVar csub(Tape& t, CVar a, CVar b) { return {t.sub(a.re, b.re), t.sub(a.im, b.im)}; }

/// Elementwise complex product.
inline CVar cmul(Tape& t, CVar a, CVar b) {
    Var re = t.sub(t.mul(a.re, b.re), t.mul(a.im, b.im));
    Var im = t.add(t.mul(a.re, b.im), t.mul(a.im, b.re));
    return {re, im};
}

/// Elementwise a * conj(b).
inline CVar cmul_conj(Tape& t, CVar a, CVar b) {
    Var re = t.add(t.mul(a.re, b.re), t.mul(a.im, b.im));
    Var im = t.sub(t.mul(a.im, b.re), t.mul(a.re, b.im));
    return {re, im};
}

/// Complex matrix product via four real products.
inline CVar cmatmul(Tape& t, CVar a, CVar b) {
    Var re = t.sub(t.matmul(a.re, b.re), t.matmul(a.im, b.im));
    Var im = t.add(t.matmul(a.re, b.im), t.matmul(a.im, b.re));
    return {re, im};
}

inline CVar creshape(Tape& t, CVar a, const std::vector<std::size_t>& shape) {
    return {t.reshape(a.re, shape), t.reshape(a.im, shape)};
}

inline CVar ctranspose_conj(Tape& t, CVar a) {
    return {t.transpose(a.re), t.neg(t.transpose(a.im))};
}

/// Squared Frobenius norm as a real scalar node.
inline Var cnorm2_sq(Tape& t, CVar a) {
    return t.add(t.sum(t.mul(a.re, a.re)), t.sum(t.mul(a.im, a.im)));
}

inline CTensor cvalue(const Tape& t, CVar a) {
    const auto& re = t.value(a.re);
    const auto& im = t.value(a.im);
    CTensor out(t.shape(a.re));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = cdouble(re[i], im[i]);
    return out;
}

} // namespace omt

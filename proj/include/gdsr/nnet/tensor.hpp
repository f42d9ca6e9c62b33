#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gdsr::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One value in the recorded computation. Gradients are allocated lazily the
// first time something flows into them, so untouched branches cost nothing.
template <typename T>
struct Node {
    Mat<T> value;
    Mat<T> grad;
    std::function<void()> backprop;  // empty for leaves and constants
    bool requires_grad = false;

    Eigen::Index rows() const { return value.rows(); }
    Eigen::Index cols() const { return value.cols(); }

    void ensure_grad() {
        if (grad.size() == 0) grad = Mat<T>::Zero(value.rows(), value.cols());
    }
    bool has_grad() const { return grad.size() != 0; }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> constant(Mat<T> v) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(v);
    return n;
}

template <typename T>
Var<T> make_param(Mat<T> v) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(v);
    n->requires_grad = true;
    return n;
}

// Records ops in creation order (which is a topological order) and replays
// their backprop closures in reverse.
template <typename T>
class Tape {
public:
    Var<T> record(Mat<T> value, bool requires_grad, std::function<void()> backprop) {
        auto n = std::make_shared<Node<T>>();
        n->value = std::move(value);
        n->requires_grad = requires_grad;
        if (requires_grad) {
            n->backprop = std::move(backprop);
            nodes_.push_back(n);
        }
        return n;
    }

    // Seeds d(loss)/d(loss) = 1 and propagates. Parameter gradients
    // accumulate across calls until the optimizer clears them.
    void backward(const Var<T>& loss) {
        if (loss->value.rows() != 1 || loss->value.cols() != 1)
            throw std::invalid_argument("backward: loss must be a scalar");
        loss->ensure_grad();
        loss->grad(0, 0) += T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            Node<T>& n = **it;
            if (n.has_grad() && n.backprop) n.backprop();
        }
    }

    void clear() { nodes_.clear(); }
    std::size_t size() const { return nodes_.size(); }

private:
    std::vector<Var<T>> nodes_;
};

namespace detail {
inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise / arithmetic
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
    detail::require(a->rows() == b->rows() && a->cols() == b->cols(), "add: shape mismatch");
    bool rg = a->requires_grad || b->requires_grad;
    auto out = tape.record(a->value + b->value, rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [a, b, o] {
            if (a->requires_grad) { a->ensure_grad(); a->grad += o->grad; }
            if (b->requires_grad) { b->ensure_grad(); b->grad += o->grad; }
        };
    }
    return out;
}

template <typename T>
Var<T> sub(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
    detail::require(a->rows() == b->rows() && a->cols() == b->cols(), "sub: shape mismatch");
    bool rg = a->requires_grad || b->requires_grad;
    auto out = tape.record(a->value - b->value, rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [a, b, o] {
            if (a->requires_grad) { a->ensure_grad(); a->grad += o->grad; }
            if (b->requires_grad) { b->ensure_grad(); b->grad -= o->grad; }
        };
    }
    return out;
}

template <typename T>
Var<T> scale(Tape<T>& tape, const Var<T>& a, T c) {
    bool rg = a->requires_grad;
    auto out = tape.record(a->value * c, rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [a, c, o] { a->ensure_grad(); a->grad += c * o->grad; };
    }
    return out;
}

template <typename T>
Var<T> mul(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
    detail::require(a->rows() == b->rows() && a->cols() == b->cols(), "mul: shape mismatch");
    bool rg = a->requires_grad || b->requires_grad;
    auto out = tape.record(a->value.cwiseProduct(b->value), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [a, b, o] {
            if (a->requires_grad) { a->ensure_grad(); a->grad += o->grad.cwiseProduct(b->value); }
            if (b->requires_grad) { b->ensure_grad(); b->grad += o->grad.cwiseProduct(a->value); }
        };
    }
    return out;
}

// rows of a scaled by the column vector s (n x 1)
template <typename T>
Var<T> mul_col(Tape<T>& tape, const Var<T>& a, const Var<T>& s) {
    detail::require(s->cols() == 1 && s->rows() == a->rows(), "mul_col: shape mismatch");
    bool rg = a->requires_grad || s->requires_grad;
    Mat<T> v = a->value.array().colwise() * s->value.col(0).array();
    auto out = tape.record(std::move(v), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [a, s, o] {
            if (a->requires_grad) {
                a->ensure_grad();
                a->grad.array() += o->grad.array().colwise() * s->value.col(0).array();
            }
            if (s->requires_grad) {
                s->ensure_grad();
                s->grad.col(0) += o->grad.cwiseProduct(a->value).rowwise().sum();
            }
        };
    }
    return out;
}

template <typename T>
Var<T> relu(Tape<T>& tape, const Var<T>& a) {
    bool rg = a->requires_grad;
    auto out = tape.record(a->value.cwiseMax(T(0)), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [a, o] {
            a->ensure_grad();
            a->grad.array() += o->grad.array() * (a->value.array() > T(0)).template cast<T>();
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// affine layers
// ---------------------------------------------------------------------------

template <typename T>
Var<T> linear(Tape<T>& tape, const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    detail::require(x->cols() == w->rows(), "linear: input width mismatch");
    detail::require(b->rows() == 1 && b->cols() == w->cols(), "linear: bias shape mismatch");
    bool rg = x->requires_grad || w->requires_grad || b->requires_grad;
    Mat<T> v = x->value * w->value;
    v.rowwise() += b->value.row(0);
    auto out = tape.record(std::move(v), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [x, w, b, o] {
            if (x->requires_grad) { x->ensure_grad(); x->grad.noalias() += o->grad * w->value.transpose(); }
            if (w->requires_grad) { w->ensure_grad(); w->grad.noalias() += x->value.transpose() * o->grad; }
            if (b->requires_grad) { b->ensure_grad(); b->grad.row(0) += o->grad.colwise().sum(); }
        };
    }
    return out;
}

// y = [x1 | x2 | x3] * w + b without materializing the concatenation.
template <typename T>
Var<T> linear3(Tape<T>& tape, const Var<T>& x1, const Var<T>& x2, const Var<T>& x3,
               const Var<T>& w, const Var<T>& b) {
    const Eigen::Index i1 = x1->cols(), i2 = x2->cols(), i3 = x3->cols();
    detail::require(i1 + i2 + i3 == w->rows(), "linear3: input width mismatch");
    detail::require(x1->rows() == x2->rows() && x2->rows() == x3->rows(), "linear3: row mismatch");
    bool rg = x1->requires_grad || x2->requires_grad || x3->requires_grad ||
              w->requires_grad || b->requires_grad;
    Mat<T> v = x1->value * w->value.topRows(i1);
    v.noalias() += x2->value * w->value.middleRows(i1, i2);
    v.noalias() += x3->value * w->value.bottomRows(i3);
    v.rowwise() += b->value.row(0);
    auto out = tape.record(std::move(v), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [x1, x2, x3, w, b, o, i1, i2, i3] {
            if (x1->requires_grad) { x1->ensure_grad(); x1->grad.noalias() += o->grad * w->value.topRows(i1).transpose(); }
            if (x2->requires_grad) { x2->ensure_grad(); x2->grad.noalias() += o->grad * w->value.middleRows(i1, i2).transpose(); }
            if (x3->requires_grad) { x3->ensure_grad(); x3->grad.noalias() += o->grad * w->value.bottomRows(i3).transpose(); }
            if (w->requires_grad) {
                w->ensure_grad();
                w->grad.topRows(i1).noalias() += x1->value.transpose() * o->grad;
                w->grad.middleRows(i1, i2).noalias() += x2->value.transpose() * o->grad;
                w->grad.bottomRows(i3).noalias() += x3->value.transpose() * o->grad;
            }
            if (b->requires_grad) { b->ensure_grad(); b->grad.row(0) += o->grad.colwise().sum(); }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// indexing
// ---------------------------------------------------------------------------

template <typename T>
Var<T> gather_rows(Tape<T>& tape, const Var<T>& a, std::vector<int> idx) {
    Mat<T> v(static_cast<Eigen::Index>(idx.size()), a->cols());
    for (std::size_t k = 0; k < idx.size(); ++k) v.row(k) = a->value.row(idx[k]);
    bool rg = a->requires_grad;
    auto out = tape.record(std::move(v), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [a, idx = std::move(idx), o] {
            a->ensure_grad();
            for (std::size_t k = 0; k < idx.size(); ++k) a->grad.row(idx[k]) += o->grad.row(k);
        };
    }
    return out;
}

// out[idx[k]] += a[k]; duplicate targets accumulate in index order.
template <typename T>
Var<T> scatter_rows(Tape<T>& tape, const Var<T>& a, std::vector<int> idx, int out_rows) {
    detail::require(static_cast<Eigen::Index>(idx.size()) == a->rows(), "scatter_rows: index count");
    Mat<T> v = Mat<T>::Zero(out_rows, a->cols());
    for (std::size_t k = 0; k < idx.size(); ++k) v.row(idx[k]) += a->value.row(k);
    bool rg = a->requires_grad;
    auto out = tape.record(std::move(v), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [a, idx = std::move(idx), o] {
            a->ensure_grad();
            for (std::size_t k = 0; k < idx.size(); ++k) a->grad.row(k) += o->grad.row(idx[k]);
        };
    }
    return out;
}

template <typename T>
Var<T> slice_cols(Tape<T>& tape, const Var<T>& a, int c0, int len) {
    detail::require(c0 >= 0 && c0 + len <= a->cols(), "slice_cols: out of range");
    bool rg = a->requires_grad;
    auto out = tape.record(a->value.middleCols(c0, len), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [a, c0, len, o] {
            a->ensure_grad();
            a->grad.middleCols(c0, len) += o->grad;
        };
    }
    return out;
}

// Fixed sparse row combination: out[i] = sum_k w_ik * a[src_ik]. Used for
// barycentric up-sampling, graph Laplacians, mapping matrices, rasterization
// and pooling, where the sparsity pattern is frame-constant.
template <typename T>
struct SparseMix {
    int out_rows = 0;
    std::vector<int> offsets{0};       // out_rows + 1
    std::vector<int> src;              // entry source row
    std::vector<T> w;                  // entry weight

    void add_row(std::initializer_list<std::pair<int, T>> entries) {
        for (auto& e : entries) { src.push_back(e.first); w.push_back(e.second); }
        offsets.push_back(static_cast<int>(src.size()));
        ++out_rows;
    }
    void begin_row() {}
    void push(int s, T weight) { src.push_back(s); w.push_back(weight); }
    void end_row() { offsets.push_back(static_cast<int>(src.size())); ++out_rows; }
};

template <typename T>
Var<T> sparse_mix(Tape<T>& tape, const Var<T>& a, std::shared_ptr<const SparseMix<T>> m) {
    Mat<T> v = Mat<T>::Zero(m->out_rows, a->cols());
    for (int i = 0; i < m->out_rows; ++i)
        for (int e = m->offsets[i]; e < m->offsets[i + 1]; ++e)
            v.row(i) += m->w[e] * a->value.row(m->src[e]);
    bool rg = a->requires_grad;
    auto out = tape.record(std::move(v), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [a, m, o] {
            a->ensure_grad();
            for (int i = 0; i < m->out_rows; ++i)
                for (int e = m->offsets[i]; e < m->offsets[i + 1]; ++e)
                    a->grad.row(m->src[e]) += m->w[e] * o->grad.row(i);
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// geometry primitives
// ---------------------------------------------------------------------------

template <typename T>
Var<T> row_norm(Tape<T>& tape, const Var<T>& a) {
    Mat<T> v(a->rows(), 1);
    for (Eigen::Index i = 0; i < a->rows(); ++i) v(i, 0) = a->value.row(i).norm();
    bool rg = a->requires_grad;
    auto out = tape.record(std::move(v), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [a, o] {
            a->ensure_grad();
            for (Eigen::Index i = 0; i < a->rows(); ++i) {
                T n = o->value(i, 0);
                if (n > T(0)) a->grad.row(i) += (o->grad(i, 0) / n) * a->value.row(i);
            }
        };
    }
    return out;
}

// rows normalized to unit length; rows below eps become `fallback` and pass
// no gradient (matches the zero-sum vertex-normal fallback).
template <typename T>
Var<T> normalize_rows(Tape<T>& tape, const Var<T>& a, T eps, const std::vector<T>& fallback) {
    detail::require(static_cast<Eigen::Index>(fallback.size()) == a->cols(), "normalize_rows: fallback width");
    Mat<T> v(a->rows(), a->cols());
    for (Eigen::Index i = 0; i < a->rows(); ++i) {
        T n = a->value.row(i).norm();
        if (n < eps)
            for (Eigen::Index c = 0; c < a->cols(); ++c) v(i, c) = fallback[c];
        else
            v.row(i) = a->value.row(i) / n;
    }
    bool rg = a->requires_grad;
    auto out = tape.record(std::move(v), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [a, eps, o] {
            a->ensure_grad();
            for (Eigen::Index i = 0; i < a->rows(); ++i) {
                T n = a->value.row(i).norm();
                if (n < eps) continue;
                auto u = o->value.row(i);
                T d = o->grad.row(i).dot(u);
                a->grad.row(i) += (o->grad.row(i) - d * u) / n;
            }
        };
    }
    return out;
}

template <typename T>
Var<T> cross(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
    detail::require(a->cols() == 3 && b->cols() == 3 && a->rows() == b->rows(), "cross: need n x 3");
    Mat<T> v(a->rows(), 3);
    for (Eigen::Index i = 0; i < a->rows(); ++i) {
        Eigen::Matrix<T, 3, 1> x = a->value.row(i), y = b->value.row(i);
        v.row(i) = x.cross(y).transpose();
    }
    bool rg = a->requires_grad || b->requires_grad;
    auto out = tape.record(std::move(v), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [a, b, o] {
            for (Eigen::Index i = 0; i < a->value.rows(); ++i) {
                Eigen::Matrix<T, 3, 1> g = o->grad.row(i);
                if (a->requires_grad) {
                    a->ensure_grad();
                    Eigen::Matrix<T, 3, 1> y = b->value.row(i);
                    a->grad.row(i) += y.cross(g).transpose();
                }
                if (b->requires_grad) {
                    b->ensure_grad();
                    Eigen::Matrix<T, 3, 1> x = a->value.row(i);
                    b->grad.row(i) += g.cross(x).transpose();
                }
            }
        };
    }
    return out;
}

template <typename T>
Var<T> rowwise_dot(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
    detail::require(a->rows() == b->rows() && a->cols() == b->cols(), "rowwise_dot: shape mismatch");
    Mat<T> v = a->value.cwiseProduct(b->value).rowwise().sum();
    bool rg = a->requires_grad || b->requires_grad;
    auto out = tape.record(std::move(v), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [a, b, o] {
            if (a->requires_grad) {
                a->ensure_grad();
                a->grad.array() += b->value.array().colwise() * o->grad.col(0).array();
            }
            if (b->requires_grad) {
                b->ensure_grad();
                b->grad.array() += a->value.array().colwise() * o->grad.col(0).array();
            }
        };
    }
    return out;
}

template <typename T>
Var<T> atan2_cols(Tape<T>& tape, const Var<T>& y, const Var<T>& x) {
    detail::require(y->cols() == 1 && x->cols() == 1 && y->rows() == x->rows(), "atan2: need n x 1");
    Mat<T> v(y->rows(), 1);
    for (Eigen::Index i = 0; i < y->rows(); ++i) v(i, 0) = std::atan2(y->value(i, 0), x->value(i, 0));
    bool rg = y->requires_grad || x->requires_grad;
    auto out = tape.record(std::move(v), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [y, x, o] {
            for (Eigen::Index i = 0; i < y->value.rows(); ++i) {
                T yy = y->value(i, 0), xx = x->value(i, 0);
                T r2 = xx * xx + yy * yy;
                if (r2 == T(0)) continue;
                T g = o->grad(i, 0);
                if (y->requires_grad) { y->ensure_grad(); y->grad(i, 0) += g * xx / r2; }
                if (x->requires_grad) { x->ensure_grad(); x->grad(i, 0) -= g * yy / r2; }
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// complex layers (block layout: [re(0..c) | im(c..2c)])
// ---------------------------------------------------------------------------

// psi(z) = exp(i*w0*z) * exp(-|a0*z|^2) on the real parameterization.
template <typename T>
Var<T> wire(Tape<T>& tape, const Var<T>& z, T omega0, T alpha0) {
    detail::require(z->cols() % 2 == 0, "wire: expected [re|im] block layout");
    const Eigen::Index c = z->cols() / 2;
    Mat<T> v(z->rows(), z->cols());
    const T a2 = alpha0 * alpha0;
    for (Eigen::Index i = 0; i < z->rows(); ++i)
        for (Eigen::Index j = 0; j < c; ++j) {
            T re = z->value(i, j), im = z->value(i, c + j);
            T m = std::exp(-omega0 * im - a2 * (re * re + im * im));
            v(i, j) = m * std::cos(omega0 * re);
            v(i, c + j) = m * std::sin(omega0 * re);
        }
    bool rg = z->requires_grad;
    auto out = tape.record(std::move(v), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [z, omega0, a2, c, o] {
            z->ensure_grad();
            for (Eigen::Index i = 0; i < z->value.rows(); ++i)
                for (Eigen::Index j = 0; j < c; ++j) {
                    T re = z->value(i, j), im = z->value(i, c + j);
                    T vre = o->value(i, j), vim = o->value(i, c + j);
                    T gre = o->grad(i, j), gim = o->grad(i, c + j);
                    // d|.|/dre = -2 a2 re, magnitude also rotates with phase w0*re
                    T dre_re = -T(2) * a2 * re * vre - omega0 * vim;
                    T dim_re = -T(2) * a2 * re * vim + omega0 * vre;
                    T k = -(omega0 + T(2) * a2 * im);
                    z->grad(i, j) += gre * dre_re + gim * dim_re;
                    z->grad(i, c + j) += gre * (k * vre) + gim * (k * vim);
                }
        };
    }
    return out;
}

// complex affine on a complex input z = [re|im]
template <typename T>
Var<T> complex_linear(Tape<T>& tape, const Var<T>& z, const Var<T>& wre, const Var<T>& wim,
                      const Var<T>& bre, const Var<T>& bim) {
    const Eigen::Index in = wre->rows(), outw = wre->cols();
    detail::require(z->cols() == 2 * in, "complex_linear: input width mismatch");
    Mat<T> v(z->rows(), 2 * outw);
    auto zre = z->value.leftCols(in), zim = z->value.rightCols(in);
    v.leftCols(outw) = zre * wre->value - zim * wim->value;
    v.leftCols(outw).rowwise() += bre->value.row(0);
    v.rightCols(outw) = zre * wim->value + zim * wre->value;
    v.rightCols(outw).rowwise() += bim->value.row(0);
    bool rg = z->requires_grad || wre->requires_grad || wim->requires_grad ||
              bre->requires_grad || bim->requires_grad;
    auto out = tape.record(std::move(v), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [z, wre, wim, bre, bim, in, outw, o] {
            auto gre = o->grad.leftCols(outw), gim = o->grad.rightCols(outw);
            auto zre = z->value.leftCols(in), zim = z->value.rightCols(in);
            if (z->requires_grad) {
                z->ensure_grad();
                z->grad.leftCols(in).noalias() += gre * wre->value.transpose();
                z->grad.leftCols(in).noalias() += gim * wim->value.transpose();
                z->grad.rightCols(in).noalias() += gim * wre->value.transpose();
                z->grad.rightCols(in).noalias() -= gre * wim->value.transpose();
            }
            if (wre->requires_grad) {
                wre->ensure_grad();
                wre->grad.noalias() += zre.transpose() * gre;
                wre->grad.noalias() += zim.transpose() * gim;
            }
            if (wim->requires_grad) {
                wim->ensure_grad();
                wim->grad.noalias() += zre.transpose() * gim;
                wim->grad.noalias() -= zim.transpose() * gre;
            }
            if (bre->requires_grad) { bre->ensure_grad(); bre->grad.row(0) += gre.colwise().sum(); }
            if (bim->requires_grad) { bim->ensure_grad(); bim->grad.row(0) += gim.colwise().sum(); }
        };
    }
    return out;
}

// complex affine on a real input (imaginary part of the input is zero)
template <typename T>
Var<T> complex_linear_real(Tape<T>& tape, const Var<T>& x, const Var<T>& wre, const Var<T>& wim,
                           const Var<T>& bre, const Var<T>& bim) {
    const Eigen::Index outw = wre->cols();
    detail::require(x->cols() == wre->rows(), "complex_linear_real: input width mismatch");
    Mat<T> v(x->rows(), 2 * outw);
    v.leftCols(outw) = x->value * wre->value;
    v.leftCols(outw).rowwise() += bre->value.row(0);
    v.rightCols(outw) = x->value * wim->value;
    v.rightCols(outw).rowwise() += bim->value.row(0);
    bool rg = x->requires_grad || wre->requires_grad || wim->requires_grad ||
              bre->requires_grad || bim->requires_grad;
    auto out = tape.record(std::move(v), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [x, wre, wim, bre, bim, outw, o] {
            auto gre = o->grad.leftCols(outw), gim = o->grad.rightCols(outw);
            if (x->requires_grad) {
                x->ensure_grad();
                x->grad.noalias() += gre * wre->value.transpose();
                x->grad.noalias() += gim * wim->value.transpose();
            }
            if (wre->requires_grad) { wre->ensure_grad(); wre->grad.noalias() += x->value.transpose() * gre; }
            if (wim->requires_grad) { wim->ensure_grad(); wim->grad.noalias() += x->value.transpose() * gim; }
            if (bre->requires_grad) { bre->ensure_grad(); bre->grad.row(0) += gre.colwise().sum(); }
            if (bim->requires_grad) { bim->ensure_grad(); bim->grad.row(0) += gim.colwise().sum(); }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// reductions (means per element, as used by all the losses)
// ---------------------------------------------------------------------------

template <typename T>
Var<T> mean_all(Tape<T>& tape, const Var<T>& a) {
    const T n = static_cast<T>(a->value.size());
    Mat<T> v(1, 1);
    v(0, 0) = a->value.sum() / n;
    bool rg = a->requires_grad;
    auto out = tape.record(std::move(v), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [a, n, o] {
            a->ensure_grad();
            a->grad.array() += o->grad(0, 0) / n;
        };
    }
    return out;
}

template <typename T>
Var<T> mean_abs(Tape<T>& tape, const Var<T>& a) {
    const T n = static_cast<T>(a->value.size());
    Mat<T> v(1, 1);
    v(0, 0) = a->value.cwiseAbs().sum() / n;
    bool rg = a->requires_grad;
    auto out = tape.record(std::move(v), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [a, n, o] {
            a->ensure_grad();
            const T g = o->grad(0, 0) / n;
            a->grad.array() += g * a->value.array().sign();
        };
    }
    return out;
}

template <typename T>
Var<T> mean_sq(Tape<T>& tape, const Var<T>& a) {
    const T n = static_cast<T>(a->value.size());
    Mat<T> v(1, 1);
    v(0, 0) = a->value.squaredNorm() / n;
    bool rg = a->requires_grad;
    auto out = tape.record(std::move(v), rg, nullptr);
    if (rg) {
        Node<T>* o = out.get();
        out->backprop = [a, n, o] {
            a->ensure_grad();
            const T g = T(2) * o->grad(0, 0) / n;
            a->grad += g * a->value;
        };
    }
    return out;
}

template <typename T>
Var<T> zero_scalar(Tape<T>& tape) {
    return tape.record(Mat<T>::Zero(1, 1), false, nullptr);
}

}  // namespace gdsr::nn

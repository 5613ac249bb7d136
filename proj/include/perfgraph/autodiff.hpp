#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "perfgraph/error.hpp"

namespace perfgraph {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Handle to a value recorded on a Tape.
struct Var {
    int id = -1;
};

/// Reverse-mode tape over dense row-major matrices. Parameter leaves read
/// their value in place and accumulate gradients into caller-owned storage.
class Tape {
public:
    explicit Tape(bool record = true) : record_(record) {}

    bool recording() const { return record_; }

    Var constant(Mat value) { return push(std::move(value), false); }

    Var param(const Mat& value, Mat* grad_sink) {
        Node n;
        n.ext = &value;
        n.sink = record_ ? grad_sink : nullptr;
        n.needs_grad = record_ && grad_sink != nullptr;
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    const Mat& value(Var v) const { return node(v).val(); }
    bool needs_grad(Var v) const { return node(v).needs_grad; }

    /// Gradient of a non-parameter node after backward (empty if untouched).
    const Mat& grad(Var v) const { return node(v).grad; }

    std::size_t size() const { return nodes_.size(); }

    /// Record an op. `back` receives the output gradient and must route it to
    /// the inputs through accumulate().
    Var op(Mat value, std::initializer_list<Var> inputs, std::function<void(Tape&, const Mat&)> back) {
        return op(std::move(value), std::vector<Var>(inputs), std::move(back));
    }

    Var op(Mat value, const std::vector<Var>& inputs, std::function<void(Tape&, const Mat&)> back) {
        bool ng = false;
        for (Var in : inputs) ng = ng || node(in).needs_grad;
        Var out = push(std::move(value), ng);
        if (ng) nodes_.back().back = std::move(back);
        return out;
    }

    void accumulate(Var v, const Mat& g) {
        Node& n = node(v);
        if (!n.needs_grad) return;
        Mat& target = n.sink ? *n.sink : n.grad;
        if (target.size() == 0) target = Mat::Zero(g.rows(), g.cols());
        target += g;
    }

    /// Seed d(output)/d(node) for each pair, then sweep in reverse.
    void backward(const std::vector<std::pair<Var, Mat>>& seeds) {
        if (!record_) fail(ErrorKind::InvalidArgument, "backward on a non-recording tape");
        int top = -1;
        for (const auto& [v, g] : seeds) {
            if (g.rows() != value(v).rows() || g.cols() != value(v).cols()) fail(ErrorKind::ShapeError, "seed gradient shape mismatch");
            accumulate(v, g);
            top = std::max(top, v.id);
        }
        for (int i = top; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (!n.back || n.grad.size() == 0) continue;
            const Mat g = std::move(n.grad);
            n.grad = Mat();
            n.back(*this, g);
        }
    }

    void backward_scalar(Var loss) {
        Mat one(1, 1);
        one(0, 0) = 1.0;
        backward({{loss, one}});
    }

private:
    struct Node {
        Mat own;
        const Mat* ext = nullptr;
        Mat* sink = nullptr;
        Mat grad;
        bool needs_grad = false;
        std::function<void(Tape&, const Mat&)> back;

        const Mat& val() const { return ext ? *ext : own; }
    };

    Var push(Mat value, bool needs_grad) {
        Node n;
        n.own = std::move(value);
        n.needs_grad = needs_grad;
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    Node& node(Var v) { return nodes_.at(static_cast<std::size_t>(v.id)); }
    const Node& node(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)); }

    bool record_;
    std::vector<Node> nodes_;
};

namespace ad {

inline void check_same_shape(const Mat& a, const Mat& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        fail(ErrorKind::ShapeError, std::string(what) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                                        std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

inline Var matmul(Tape& t, Var a, Var b) {
    const Mat& A = t.value(a);
    const Mat& B = t.value(b);
    if (A.cols() != B.rows()) fail(ErrorKind::ShapeError, "matmul inner dimension mismatch");
    return t.op(A * B, {a, b}, [a, b](Tape& tp, const Mat& g) {
        if (tp.needs_grad(a)) tp.accumulate(a, g * tp.value(b).transpose());
        if (tp.needs_grad(b)) tp.accumulate(b, tp.value(a).transpose() * g);
    });
}

inline Var add(Tape& t, Var a, Var b) {
    check_same_shape(t.value(a), t.value(b), "add");
    return t.op(t.value(a) + t.value(b), {a, b}, [a, b](Tape& tp, const Mat& g) {
        tp.accumulate(a, g);
        tp.accumulate(b, g);
    });
}

inline Var sub(Tape& t, Var a, Var b) {
    check_same_shape(t.value(a), t.value(b), "sub");
    return t.op(t.value(a) - t.value(b), {a, b}, [a, b](Tape& tp, const Mat& g) {
        tp.accumulate(a, g);
        tp.accumulate(b, -g);
    });
}

/// A (n x m) plus a broadcast row b (1 x m).
inline Var add_row(Tape& t, Var a, Var b) {
    const Mat& A = t.value(a);
    const Mat& B = t.value(b);
    if (B.rows() != 1 || B.cols() != A.cols()) fail(ErrorKind::ShapeError, "add_row expects a 1 x cols row");
    Mat out = A.rowwise() + B.row(0);
    return t.op(std::move(out), {a, b}, [a, b](Tape& tp, const Mat& g) {
        tp.accumulate(a, g);
        if (tp.needs_grad(b)) tp.accumulate(b, g.colwise().sum());
    });
}

inline Var scale(Tape& t, Var a, double s) {
    return t.op(t.value(a) * s, {a}, [a, s](Tape& tp, const Mat& g) { tp.accumulate(a, g * s); });
}

inline Var add_scalar(Tape& t, Var a, double s) {
    return t.op(t.value(a).array() + s, {a}, [a](Tape& tp, const Mat& g) { tp.accumulate(a, g); });
}

inline Var cmul(Tape& t, Var a, Var b) {
    check_same_shape(t.value(a), t.value(b), "cmul");
    return t.op(t.value(a).cwiseProduct(t.value(b)), {a, b}, [a, b](Tape& tp, const Mat& g) {
        if (tp.needs_grad(a)) tp.accumulate(a, g.cwiseProduct(tp.value(b)));
        if (tp.needs_grad(b)) tp.accumulate(b, g.cwiseProduct(tp.value(a)));
    });
}

/// Elementwise product with a constant mask (dropout).
inline Var mask(Tape& t, Var a, Mat m) {
    check_same_shape(t.value(a), m, "mask");
    Mat out = t.value(a).cwiseProduct(m);
    return t.op(std::move(out), {a}, [a, m = std::move(m)](Tape& tp, const Mat& g) { tp.accumulate(a, g.cwiseProduct(m)); });
}

/// Elementwise map; `df` gives the derivative at the input.
template <class F, class D>
Var unary(Tape& t, Var a, F f, D df) {
    Mat out = t.value(a).unaryExpr(f);
    return t.op(std::move(out), {a}, [a, df](Tape& tp, const Mat& g) {
        const Mat& x = tp.value(a);
        Mat d(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.size(); ++i) d.data()[i] = g.data()[i] * df(x.data()[i]);
        tp.accumulate(a, d);
    });
}

inline Var relu(Tape& t, Var a) {
    return unary(t, a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Var elu(Tape& t, Var a) {
    return unary(t, a, [](double x) { return x > 0.0 ? x : std::expm1(x); }, [](double x) { return x > 0.0 ? 1.0 : std::exp(x); });
}

inline Var leaky_relu(Tape& t, Var a, double slope = 0.2) {
    return unary(t, a, [slope](double x) { return x > 0.0 ? x : slope * x; }, [slope](double x) { return x > 0.0 ? 1.0 : slope; });
}

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Var softplus(Tape& t, Var a) {
    return unary(t, a, [](double x) { return softplus(x); }, [](double x) { return sigmoid(x); });
}

inline Var gather_rows(Tape& t, Var a, const std::vector<int>& idx) {
    const Mat& A = t.value(a);
    Mat out(static_cast<Eigen::Index>(idx.size()), A.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = A.row(idx[i]);
    const Eigen::Index rows = A.rows();
    return t.op(std::move(out), {a}, [a, idx, rows](Tape& tp, const Mat& g) {
        Mat d = Mat::Zero(rows, g.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) d.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
        tp.accumulate(a, d);
    });
}

/// out[idx[i]] += a[i] over `rows` output rows.
inline Var scatter_add_rows(Tape& t, Var a, const std::vector<int>& idx, Eigen::Index rows) {
    const Mat& A = t.value(a);
    if (static_cast<std::size_t>(A.rows()) != idx.size()) fail(ErrorKind::ShapeError, "scatter index length mismatch");
    Mat out = Mat::Zero(rows, A.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(idx[i]) += A.row(static_cast<Eigen::Index>(i));
    return t.op(std::move(out), {a}, [a, idx](Tape& tp, const Mat& g) {
        Mat d(static_cast<Eigen::Index>(idx.size()), g.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) d.row(static_cast<Eigen::Index>(i)) = g.row(idx[i]);
        tp.accumulate(a, d);
    });
}

inline Var concat_rows(Tape& t, const std::vector<Var>& parts) {
    Eigen::Index rows = 0, cols = -1;
    for (Var p : parts) {
        const Mat& m = t.value(p);
        if (cols >= 0 && m.cols() != cols) fail(ErrorKind::ShapeError, "concat_rows column mismatch");
        cols = m.cols();
        rows += m.rows();
    }
    Mat out(rows, std::max<Eigen::Index>(cols, 0));
    Eigen::Index r = 0;
    for (Var p : parts) {
        const Mat& m = t.value(p);
        out.middleRows(r, m.rows()) = m;
        r += m.rows();
    }
    return t.op(std::move(out), parts, [parts](Tape& tp, const Mat& g) {
        Eigen::Index r0 = 0;
        for (Var p : parts) {
            const Eigen::Index n = tp.value(p).rows();
            if (tp.needs_grad(p)) tp.accumulate(p, g.middleRows(r0, n));
            r0 += n;
        }
    });
}

inline Var concat_cols(Tape& t, const std::vector<Var>& parts) {
    Eigen::Index rows = -1, cols = 0;
    for (Var p : parts) {
        const Mat& m = t.value(p);
        if (rows >= 0 && m.rows() != rows) fail(ErrorKind::ShapeError, "concat_cols row mismatch");
        rows = m.rows();
        cols += m.cols();
    }
    Mat out(std::max<Eigen::Index>(rows, 0), cols);
    Eigen::Index c = 0;
    for (Var p : parts) {
        const Mat& m = t.value(p);
        out.middleCols(c, m.cols()) = m;
        c += m.cols();
    }
    return t.op(std::move(out), parts, [parts](Tape& tp, const Mat& g) {
        Eigen::Index c0 = 0;
        for (Var p : parts) {
            const Eigen::Index n = tp.value(p).cols();
            if (tp.needs_grad(p)) tp.accumulate(p, g.middleCols(c0, n));
            c0 += n;
        }
    });
}

inline Var slice_rows(Tape& t, Var a, Eigen::Index start, Eigen::Index n) {
    const Mat& A = t.value(a);
    if (start < 0 || start + n > A.rows()) fail(ErrorKind::ShapeError, "slice_rows out of range");
    const Eigen::Index rows = A.rows();
    return t.op(A.middleRows(start, n), {a}, [a, start, n, rows](Tape& tp, const Mat& g) {
        Mat d = Mat::Zero(rows, g.cols());
        d.middleRows(start, n) = g;
        tp.accumulate(a, d);
    });
}

inline Var slice_cols(Tape& t, Var a, Eigen::Index start, Eigen::Index n) {
    const Mat& A = t.value(a);
    if (start < 0 || start + n > A.cols()) fail(ErrorKind::ShapeError, "slice_cols out of range");
    const Eigen::Index cols = A.cols();
    return t.op(A.middleCols(start, n), {a}, [a, start, n, cols](Tape& tp, const Mat& g) {
        Mat d = Mat::Zero(g.rows(), cols);
        d.middleCols(start, n) = g;
        tp.accumulate(a, d);
    });
}

/// Softmax of a column vector within segments; seg[i] in [0, segments).
inline Var segment_softmax(Tape& t, Var logits, const std::vector<int>& seg, int segments) {
    const Mat& L = t.value(logits);
    if (L.cols() != 1 || static_cast<std::size_t>(L.rows()) != seg.size()) fail(ErrorKind::ShapeError, "segment_softmax expects E x 1");
    std::vector<double> mx(static_cast<std::size_t>(segments), -INFINITY), sum(static_cast<std::size_t>(segments), 0.0);
    for (std::size_t i = 0; i < seg.size(); ++i) {
        const double v = L(static_cast<Eigen::Index>(i), 0);
        if (!std::isfinite(v)) fail(ErrorKind::NumericError, "non-finite attention logit");
        mx[static_cast<std::size_t>(seg[i])] = std::max(mx[static_cast<std::size_t>(seg[i])], v);
    }
    Mat out(L.rows(), 1);
    for (std::size_t i = 0; i < seg.size(); ++i) {
        const double e = std::exp(L(static_cast<Eigen::Index>(i), 0) - mx[static_cast<std::size_t>(seg[i])]);
        out(static_cast<Eigen::Index>(i), 0) = e;
        sum[static_cast<std::size_t>(seg[i])] += e;
    }
    for (std::size_t i = 0; i < seg.size(); ++i) out(static_cast<Eigen::Index>(i), 0) /= sum[static_cast<std::size_t>(seg[i])];
    Var self{static_cast<int>(t.size())};
    return t.op(std::move(out), {logits}, [logits, seg, segments, self](Tape& tp, const Mat& g) {
        const Mat& a = tp.value(self);
        std::vector<double> dot(static_cast<std::size_t>(segments), 0.0);
        for (std::size_t i = 0; i < seg.size(); ++i)
            dot[static_cast<std::size_t>(seg[i])] += a(static_cast<Eigen::Index>(i), 0) * g(static_cast<Eigen::Index>(i), 0);
        Mat d(a.rows(), 1);
        for (std::size_t i = 0; i < seg.size(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            d(r, 0) = a(r, 0) * (g(r, 0) - dot[static_cast<std::size_t>(seg[i])]);
        }
        tp.accumulate(logits, d);
    });
}

/// Row i of a scaled by w(i, 0).
inline Var row_scale(Tape& t, Var a, Var w) {
    const Mat& A = t.value(a);
    const Mat& W = t.value(w);
    if (W.cols() != 1 || W.rows() != A.rows()) fail(ErrorKind::ShapeError, "row_scale expects rows x 1 weights");
    Mat out = A.array().colwise() * W.col(0).array();
    return t.op(std::move(out), {a, w}, [a, w](Tape& tp, const Mat& g) {
        if (tp.needs_grad(a)) {
            Mat d = g.array().colwise() * tp.value(w).col(0).array();
            tp.accumulate(a, d);
        }
        if (tp.needs_grad(w)) tp.accumulate(w, g.cwiseProduct(tp.value(a)).rowwise().sum());
    });
}

inline Var sum_all(Tape& t, Var a) {
    Mat out(1, 1);
    out(0, 0) = t.value(a).sum();
    const Eigen::Index r = t.value(a).rows(), c = t.value(a).cols();
    return t.op(std::move(out), {a}, [a, r, c](Tape& tp, const Mat& g) { tp.accumulate(a, Mat::Constant(r, c, g(0, 0))); });
}

} // namespace ad
} // namespace perfgraph

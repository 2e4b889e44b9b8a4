#include "noran/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "noran/error.hpp"

namespace noran {

namespace {

double g_tanh_fault = 1.0;

std::size_t product(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
    throw ShapeMismatch(std::string(op) + ": " + shape_string(a) + " vs " + shape_string(b));
}

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid_value(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

enum class Broadcast { Same, Row, Scalar };

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
    if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::Same;
    if (b.rows() == 1 && b.cols() == 1) return Broadcast::Scalar;
    if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::Row;
    mismatch(op, a.shape(), b.shape());
}

std::size_t broadcast_index(Broadcast kind, std::size_t i, std::size_t cols) {
    switch (kind) {
        case Broadcast::Same: return i;
        case Broadcast::Row: return i % cols;
        case Broadcast::Scalar: return 0;
    }
    return 0;
}

Shape matrix_shape(std::size_t r, std::size_t c) { return {r, c}; }

// Elementwise unary op with derivative expressed through input x and output y.
template <typename F, typename D>
Var unary(Var a, F forward, D derivative) {
    const Tensor& x = a.value();
    Tensor y(matrix_shape(x.rows(), x.cols()));
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
    const std::uint32_t in = a.id();
    return a.tape().record(std::move(y), {in}, [in, derivative](Tape& t, std::uint32_t self) {
        Tensor* gx = t.grad_sink(in);
        if (!gx) return;
        const Tensor& x = t.value_of(in);
        const Tensor& y = t.value_of(self);
        const Tensor& gy = t.grad_of(self);
        for (std::size_t i = 0; i < x.size(); ++i) (*gx)[i] += gy[i] * derivative(x[i], y[i]);
    });
}

}  // namespace

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

// ---- Tensor ------------------------------------------------------------

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != product(shape_)) {
        throw ShapeMismatch("tensor " + shape_string(shape_) + " given " + std::to_string(values_.size()) +
                            " values");
    }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
    return Tensor({rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::rows() const { return shape_.empty() ? 1 : shape_[0]; }

std::size_t Tensor::cols() const {
    if (shape_.size() < 2) return 1;
    return product(shape_) / shape_[0];
}

double Tensor::item() const {
    if (values_.size() != 1) throw ShapeMismatch("item() on " + shape_string(shape_));
    return values_[0];
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

Parameter::Parameter(std::string n, Tensor v, bool is_frozen)
    : name(std::move(n)), value(std::move(v)), grad(value.shape()), frozen(is_frozen) {}

void Parameter::zero_grad() {
    if (grad.shape() != value.shape()) grad = Tensor(value.shape());
    grad.fill(0.0);
}

Csr Csr::from_rows(std::size_t n_cols, const std::vector<std::vector<std::uint32_t>>& rows) {
    Csr c;
    c.n_rows = rows.size();
    c.n_cols = n_cols;
    c.offsets.reserve(rows.size() + 1);
    c.offsets.push_back(0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (auto col : rows[r]) {
            c.cols.push_back(col);
            c.row_of.push_back(static_cast<std::uint32_t>(r));
        }
        c.offsets.push_back(static_cast<std::uint32_t>(c.cols.size()));
    }
    return c;
}

// ---- Tape --------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value_of(id_); }

Var Tape::constant(Tensor value) { return record(std::move(value), {}, nullptr); }

Var Tape::variable(Tensor value) {
    Var v = record(std::move(value), {}, nullptr);
    nodes_[v.id()].needs_grad = true;
    return v;
}

Var Tape::param(Parameter& p) {
    Var v = record(p.value, {}, nullptr);
    if (!p.frozen) {
        nodes_[v.id()].param = &p;
        nodes_[v.id()].needs_grad = true;
    }
    return v;
}

Var Tape::record(Tensor value, std::vector<std::uint32_t> inputs, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    for (auto in : inputs) n.needs_grad = n.needs_grad || nodes_[in].needs_grad;
    n.inputs = std::move(inputs);
    if (n.needs_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor* Tape::grad_sink(std::uint32_t id) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return nullptr;
    if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape());
    return &n.grad;
}

void Tape::backward(Var loss) {
    if (loss.value().size() != 1) throw NonScalarLoss();
    for (auto& n : nodes_) n.grad = Tensor();
    const std::uint32_t root = loss.id();
    if (!nodes_[root].needs_grad) return;
    grad_sink(root)->fill(1.0);
    for (std::uint32_t i = root + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.grad.size() == 0) continue;
        if (n.backward) n.backward(*this, i);
        if (n.param) {
            if (n.param->grad.shape() != n.value.shape()) n.param->zero_grad();
            for (std::size_t k = 0; k < n.grad.size(); ++k) n.param->grad[k] += n.grad[k];
        }
    }
}

Tensor Tape::grad(Var v) const {
    const Node& n = nodes_[v.id()];
    if (n.grad.size() == n.value.size()) return n.grad;
    return Tensor(n.value.shape());
}

// ---- primitives --------------------------------------------------------

Var matmul(Var a, Var b) {
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    const std::size_t m = x.rows(), k = x.cols(), n = y.cols();
    if (y.rows() != k) mismatch("matmul", x.shape(), y.shape());
    Tensor out(matrix_shape(m, n));
    for (std::size_t i = 0; i < m; ++i) {
        double* o = &out[i * n];
        for (std::size_t p = 0; p < k; ++p) {
            const double xv = x[i * k + p];
            if (xv == 0.0) continue;
            const double* yr = &y[p * n];
            for (std::size_t j = 0; j < n; ++j) o[j] += xv * yr[j];
        }
    }
    mac_counter() += m * k * n;
    const std::uint32_t ia = a.id(), ib = b.id();
    return a.tape().record(std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& t, std::uint32_t self) {
        const Tensor& g = t.grad_of(self);
        const Tensor& x = t.value_of(ia);
        const Tensor& y = t.value_of(ib);
        if (Tensor* gx = t.grad_sink(ia)) {
            // gx = g * y^T
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * y[p * n + j];
                    (*gx)[i * k + p] += s;
                }
        }
        if (Tensor* gy = t.grad_sink(ib)) {
            // gy = x^T * g
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double xv = x[i * k + p];
                    if (xv == 0.0) continue;
                    for (std::size_t j = 0; j < n; ++j) (*gy)[p * n + j] += xv * g[i * n + j];
                }
        }
    });
}

namespace {

template <typename F, typename DA, typename DB>
Var binary(const char* name, Var a, Var b, F f, DA da, DB db) {
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    const Broadcast kind = broadcast_kind(name, x, y);
    const std::size_t cols = x.cols();
    Tensor out(matrix_shape(x.rows(), cols));
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i], y[broadcast_index(kind, i, cols)]);
    const std::uint32_t ia = a.id(), ib = b.id();
    return a.tape().record(std::move(out), {ia, ib}, [=](Tape& t, std::uint32_t self) {
        const Tensor& g = t.grad_of(self);
        const Tensor& x = t.value_of(ia);
        const Tensor& y = t.value_of(ib);
        Tensor* gx = t.grad_sink(ia);
        Tensor* gy = t.grad_sink(ib);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const std::size_t j = broadcast_index(kind, i, cols);
            if (gx) (*gx)[i] += g[i] * da(x[i], y[j]);
            if (gy) (*gy)[j] += g[i] * db(x[i], y[j]);
        }
    });
}

}  // namespace

Var add(Var a, Var b) {
    return binary(
        "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
    return binary(
        "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
    return binary(
        "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Var scale(Var a, double factor) {
    return unary(a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double c) {
    return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var concat(const std::vector<Var>& parts, int axis) {
    if (parts.empty()) throw InvalidArgument("concat of zero tensors");
    if (axis != 0 && axis != 1) throw InvalidArgument("concat axis must be 0 or 1");
    std::vector<std::uint32_t> ids;
    std::vector<std::size_t> extents;
    const std::size_t rows0 = parts[0].rows(), cols0 = parts[0].cols();
    std::size_t total = 0;
    for (const Var& p : parts) {
        if (axis == 0 && p.cols() != cols0) mismatch("concat", parts[0].shape(), p.shape());
        if (axis == 1 && p.rows() != rows0) mismatch("concat", parts[0].shape(), p.shape());
        ids.push_back(p.id());
        extents.push_back(axis == 0 ? p.rows() : p.cols());
        total += extents.back();
    }
    const std::size_t out_rows = axis == 0 ? total : rows0;
    const std::size_t out_cols = axis == 0 ? cols0 : total;
    Tensor out(matrix_shape(out_rows, out_cols));
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& v = parts[k].value();
        for (std::size_t r = 0; r < v.rows(); ++r)
            for (std::size_t c = 0; c < v.cols(); ++c) {
                if (axis == 0)
                    out.at(offset + r, c) = v.at(r, c);
                else
                    out.at(r, offset + c) = v.at(r, c);
            }
        offset += extents[k];
    }
    return parts[0].tape().record(std::move(out), ids, [ids, extents, axis](Tape& t, std::uint32_t self) {
        const Tensor& g = t.grad_of(self);
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (Tensor* gp = t.grad_sink(ids[k])) {
                for (std::size_t r = 0; r < gp->rows(); ++r)
                    for (std::size_t c = 0; c < gp->cols(); ++c)
                        gp->at(r, c) += axis == 0 ? g.at(offset + r, c) : g.at(r, offset + c);
            }
            offset += extents[k];
        }
    });
}

Var gather_rows(Var a, std::vector<std::uint32_t> indices) {
    const Tensor& x = a.value();
    const std::size_t cols = x.cols();
    Tensor out(matrix_shape(indices.size(), cols));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= x.rows()) throw InvalidArgument("gather_rows index out of range");
        std::copy_n(&x[indices[i] * cols], cols, &out[i * cols]);
    }
    const std::uint32_t in = a.id();
    return a.tape().record(std::move(out), {in}, [in, cols, idx = std::move(indices)](Tape& t, std::uint32_t self) {
        Tensor* gx = t.grad_sink(in);
        if (!gx) return;
        const Tensor& g = t.grad_of(self);
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t c = 0; c < cols; ++c) (*gx)[idx[i] * cols + c] += g[i * cols + c];
    });
}

Var scatter_add_rows(Var a, std::vector<std::uint32_t> indices, std::size_t n_rows) {
    const Tensor& x = a.value();
    if (indices.size() != x.rows()) mismatch("scatter_add_rows", x.shape(), {indices.size()});
    const std::size_t cols = x.cols();
    Tensor out(matrix_shape(n_rows, cols));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= n_rows) throw InvalidArgument("scatter_add_rows index out of range");
        for (std::size_t c = 0; c < cols; ++c) out[indices[i] * cols + c] += x[i * cols + c];
    }
    const std::uint32_t in = a.id();
    return a.tape().record(std::move(out), {in}, [in, cols, idx = std::move(indices)](Tape& t, std::uint32_t self) {
        Tensor* gx = t.grad_sink(in);
        if (!gx) return;
        const Tensor& g = t.grad_of(self);
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t c = 0; c < cols; ++c) (*gx)[i * cols + c] += g[idx[i] * cols + c];
    });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
    const Tensor& x = a.value();
    if (begin > end || end > x.rows()) throw InvalidArgument("slice_rows out of range");
    const std::size_t cols = x.cols();
    Tensor out(matrix_shape(end - begin, cols),
               std::vector<double>(x.values().begin() + begin * cols, x.values().begin() + end * cols));
    const std::uint32_t in = a.id();
    return a.tape().record(std::move(out), {in}, [in, begin, cols](Tape& t, std::uint32_t self) {
        Tensor* gx = t.grad_sink(in);
        if (!gx) return;
        const Tensor& g = t.grad_of(self);
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[begin * cols + i] += g[i];
    });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
    const Tensor& x = a.value();
    if (begin > end || end > x.cols()) throw InvalidArgument("slice_cols out of range");
    const std::size_t rows = x.rows(), cols = x.cols(), w = end - begin;
    Tensor out(matrix_shape(rows, w));
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(&x[r * cols + begin], w, &out[r * w]);
    const std::uint32_t in = a.id();
    return a.tape().record(std::move(out), {in}, [in, begin, cols, rows, w](Tape& t, std::uint32_t self) {
        Tensor* gx = t.grad_sink(in);
        if (!gx) return;
        const Tensor& g = t.grad_of(self);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < w; ++c) (*gx)[r * cols + begin + c] += g[r * w + c];
    });
}

Var relu(Var a) {
    return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
    return unary(a, sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
    return unary(
        a, [](double x) { return std::tanh(x); }, [](double, double y) { return (1.0 - y * y) * g_tanh_fault; });
}

Var exp(Var a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
    return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var softplus(Var a) {
    return unary(a, softplus_value, [](double x, double) { return sigmoid_value(x); });
}

Var log_sigmoid(Var a) {
    return unary(
        a, [](double x) { return -softplus_value(-x); }, [](double x, double) { return sigmoid_value(-x); });
}

Var segment_softmax(Var a, std::vector<std::uint32_t> segment_ids, std::size_t n_segments) {
    const Tensor& x = a.value();
    if (x.cols() != 1 || segment_ids.size() != x.rows())
        mismatch("segment_softmax", x.shape(), {segment_ids.size(), 1});
    for (std::size_t i = 0; i < segment_ids.size(); ++i) {
        if (segment_ids[i] >= n_segments) throw InvalidArgument("segment id out of range");
        if (i > 0 && segment_ids[i] < segment_ids[i - 1])
            throw InvalidArgument("segment ids must be non-decreasing");
    }
    Tensor y(matrix_shape(x.rows(), 1));
    std::size_t begin = 0;
    while (begin < x.rows()) {
        std::size_t end = begin;
        while (end < x.rows() && segment_ids[end] == segment_ids[begin]) ++end;
        double mx = x[begin];
        for (std::size_t i = begin; i < end; ++i) mx = std::max(mx, x[i]);
        double z = 0.0;
        for (std::size_t i = begin; i < end; ++i) z += (y[i] = std::exp(x[i] - mx));
        for (std::size_t i = begin; i < end; ++i) y[i] /= z;
        begin = end;
    }
    const std::uint32_t in = a.id();
    return a.tape().record(std::move(y), {in}, [in, seg = std::move(segment_ids)](Tape& t, std::uint32_t self) {
        Tensor* gx = t.grad_sink(in);
        if (!gx) return;
        const Tensor& y = t.value_of(self);
        const Tensor& g = t.grad_of(self);
        std::size_t begin = 0;
        while (begin < seg.size()) {
            std::size_t end = begin;
            while (end < seg.size() && seg[end] == seg[begin]) ++end;
            double dot = 0.0;
            for (std::size_t i = begin; i < end; ++i) dot += y[i] * g[i];
            for (std::size_t i = begin; i < end; ++i) (*gx)[i] += y[i] * (g[i] - dot);
            begin = end;
        }
    });
}

Var sum(Var a) {
    const Tensor& x = a.value();
    double s = 0.0;
    for (double v : x.values()) s += v;
    const std::uint32_t in = a.id();
    return a.tape().record(Tensor::scalar(s), {in}, [in](Tape& t, std::uint32_t self) {
        Tensor* gx = t.grad_sink(in);
        if (!gx) return;
        const double g = t.grad_of(self)[0];
        for (auto& v : gx->values()) v += g;
    });
}

Var mean(Var a) {
    const std::size_t n = a.value().size();
    if (n == 0) throw EmptyBatch();
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var spmm(std::shared_ptr<const Csr> structure, Var weights, Var x) {
    const Csr& s = *structure;
    const Tensor& w = weights.value();
    const Tensor& xv = x.value();
    if (w.size() != s.nnz()) mismatch("spmm weights", w.shape(), {s.nnz(), 1});
    if (xv.rows() != s.n_cols) mismatch("spmm features", xv.shape(), {s.n_cols, xv.cols()});
    const std::size_t f = xv.cols();
    Tensor out(matrix_shape(s.n_rows, f));
    for (std::size_t r = 0; r < s.n_rows; ++r) {
        double* o = &out[r * f];
        for (std::size_t e = s.offsets[r]; e < s.offsets[r + 1]; ++e) {
            const double we = w[e];
            const double* xr = &xv[s.cols[e] * f];
            for (std::size_t c = 0; c < f; ++c) o[c] += we * xr[c];
        }
    }
    mac_counter() += s.nnz() * f;
    const std::uint32_t iw = weights.id(), ix = x.id();
    return x.tape().record(std::move(out), {iw, ix}, [structure, iw, ix, f](Tape& t, std::uint32_t self) {
        const Csr& s = *structure;
        const Tensor& g = t.grad_of(self);
        const Tensor& w = t.value_of(iw);
        const Tensor& xv = t.value_of(ix);
        Tensor* gw = t.grad_sink(iw);
        Tensor* gx = t.grad_sink(ix);
        for (std::size_t r = 0; r < s.n_rows; ++r) {
            const double* gr = &g[r * f];
            for (std::size_t e = s.offsets[r]; e < s.offsets[r + 1]; ++e) {
                const std::size_t col = s.cols[e];
                if (gw) {
                    double d = 0.0;
                    for (std::size_t c = 0; c < f; ++c) d += gr[c] * xv[col * f + c];
                    (*gw)[e] += d;
                }
                if (gx) {
                    for (std::size_t c = 0; c < f; ++c) (*gx)[col * f + c] += w[e] * gr[c];
                }
            }
        }
    });
}

// ---- Adam --------------------------------------------------------------

Adam::Adam(std::vector<Parameter*> params, AdamOptions options) : params_(std::move(params)), options_(options) {
    for (Parameter* p : params_) {
        m_.emplace_back(p->value.shape());
        v_.emplace_back(p->value.shape());
    }
}

void Adam::step() {
    ++step_;
    const double b1 = options_.beta1, b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Parameter& p = *params_[k];
        if (p.frozen) continue;
        if (p.grad.shape() != p.value.shape()) mismatch("adam", p.value.shape(), p.grad.shape());
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            p.value[i] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (Parameter* p : params_) p->zero_grad();
}

std::uint64_t& mac_counter() {
    thread_local std::uint64_t counter = 0;
    return counter;
}

namespace testing {
void set_backward_fault(double factor) { g_tanh_fault = factor; }
}  // namespace testing

}  // namespace noran

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace noran {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Dense row-major array of doubles. Value type; copying copies the buffer.
class Tensor {
   public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor({1, 1}, std::vector<double>{v}); }
    static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return values_.size(); }
    // Matrix view: rank-1 tensors read as a column, rank-0 as 1x1.
    std::size_t rows() const;
    std::size_t cols() const;

    double& operator[](std::size_t i) { return values_[i]; }
    const double& operator[](std::size_t i) const { return values_[i]; }
    double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
    double item() const;

    std::span<double> data() { return values_; }
    std::span<const double> data() const { return values_; }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    std::span<const double> row(std::size_t r) const { return data().subspan(r * cols(), cols()); }
    std::span<double> row(std::size_t r) { return data().subspan(r * cols(), cols()); }

    void fill(double v);
    bool operator==(const Tensor& other) const = default;

   private:
    Shape shape_;
    std::vector<double> values_;
};

// A named trainable (or frozen) tensor that outlives individual tapes.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool frozen = false;

    Parameter() = default;
    Parameter(std::string n, Tensor v, bool is_frozen = false);
    void zero_grad();
};

// Compressed sparse rows for message passing: entry e of row i reads column
// cols[e]. row_of[e] is the expanded row index.
struct Csr {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::uint32_t> offsets;
    std::vector<std::uint32_t> cols;
    std::vector<std::uint32_t> row_of;

    std::size_t nnz() const { return cols.size(); }
    static Csr from_rows(std::size_t n_cols, const std::vector<std::vector<std::uint32_t>>& rows);
};

class Tape;

// Handle to a value recorded on a tape.
class Var {
   public:
    Var() = default;
    Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    Tape& tape() const { return *tape_; }
    std::uint32_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

   private:
    Tape* tape_ = nullptr;
    std::uint32_t id_ = 0;
};

// Records primitive applications in order; backward() replays them in exact
// reverse order. Single-threaded; independent tapes may run concurrently.
class Tape {
   public:
    using BackwardFn = std::function<void(Tape&, std::uint32_t)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    // Leaf whose gradient is kept on the tape (read back with grad()).
    Var variable(Tensor value);
    // Leaf bound to a parameter; backward() accumulates into param.grad
    // unless the parameter is frozen, in which case it acts as a constant.
    Var param(Parameter& p);

    void backward(Var loss);
    // Gradient of the last backward() with respect to v (zeros if unreached).
    Tensor grad(Var v) const;

    std::size_t size() const { return nodes_.size(); }

    // Used by primitive implementations.
    Var record(Tensor value, std::vector<std::uint32_t> inputs, BackwardFn fn);
    const Tensor& value_of(std::uint32_t id) const { return nodes_[id].value; }
    const Tensor& grad_of(std::uint32_t id) const { return nodes_[id].grad; }
    // Gradient buffer of an input, allocated on first use. Null when the
    // input does not need a gradient.
    Tensor* grad_sink(std::uint32_t id);

   private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<std::uint32_t> inputs;
        BackwardFn backward;
        Parameter* param = nullptr;
        bool needs_grad = false;
    };
    std::vector<Node> nodes_;
};

// ---- primitives --------------------------------------------------------
// Binary elementwise ops accept equal shapes, a [1,n] row broadcast over the
// rows of the left operand, or a [1,1] scalar.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);
Var neg(Var a);
Var concat(const std::vector<Var>& parts, int axis);
Var gather_rows(Var a, std::vector<std::uint32_t> indices);
Var scatter_add_rows(Var a, std::vector<std::uint32_t> indices, std::size_t n_rows);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var softplus(Var a);
// log(sigmoid(a)) evaluated as -softplus(-a).
Var log_sigmoid(Var a);
// Softmax of a column vector within contiguous segments; segment ids must be
// non-decreasing.
Var segment_softmax(Var a, std::vector<std::uint32_t> segment_ids, std::size_t n_segments);
Var sum(Var a);
Var mean(Var a);
// out[i] = sum_e weights[e] * x[cols[e]] over the entries e of row i.
Var spmm(std::shared_ptr<const Csr> structure, Var weights, Var x);

// ---- optimizer ---------------------------------------------------------

struct AdamOptions {
    double lr = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
   public:
    Adam(std::vector<Parameter*> params, AdamOptions options = {});

    // One bias-corrected update from the gradients currently held by each
    // parameter. Frozen parameters are skipped.
    void step();
    void zero_grad();
    std::uint64_t steps() const { return step_; }
    const AdamOptions& options() const { return options_; }

   private:
    std::vector<Parameter*> params_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    AdamOptions options_;
    std::uint64_t step_ = 0;
};

// ---- instrumentation ---------------------------------------------------

// Forward multiply-accumulate counter of the calling thread. matmul and spmm
// add to it; other kernels may add their own counts.
std::uint64_t& mac_counter();

namespace testing {
// Scales the tanh backward rule. A factor other than 1 breaks gradients on
// purpose so gradient checks can be shown to fail.
void set_backward_fault(double factor);
}  // namespace testing

}  // namespace noran

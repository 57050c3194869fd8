#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "unicast/errors.hpp"
#include "unicast/rng.hpp"

namespace unicast {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad; // empty until touched by backward/accumulation
    bool requires_grad = false;
    bool is_leaf = true;
    uint64_t id = 0;
    std::vector<std::shared_ptr<TensorNode>> parents;
    // Accumulates d(loss)/d(parent) into each parent's grad buffer, given
    // this node's grad. Empty for leaves.
    std::function<void(const TensorNode&)> backward_fn;

    void ensure_grad();
};

} // namespace detail

// Dense float64 tensor participating in a dynamically built reverse-mode
// autodiff graph. Handles are cheap to copy (shared node). Nodes are never
// mutated by ops after construction; the only sanctioned in-place writes are
// leaf data updates (optimizers, finite-difference probes) and grad buffers.
class Tensor {
public:
    Tensor() = default;

    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const;
    int64_t size() const;
    int rows() const; // rank-2 (or rank-1 treated as a single row)
    int cols() const;

    const std::vector<double>& values() const;
    double value() const; // scalar tensors only
    double at(int64_t i) const;
    double at(int i, int j) const;

    bool requires_grad() const;
    bool is_leaf() const;
    uint64_t id() const;

    bool has_grad() const;
    const std::vector<double>& grad() const; // throws contract_error if absent
    void zero_grad();

    // Leaf-only in-place access, for optimizer steps and gradient probes.
    std::vector<double>& mutable_data();

    std::shared_ptr<detail::TensorNode> node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}
    std::shared_ptr<detail::TensorNode> node_;

    friend Tensor make_op_result(Shape shape, std::vector<double> data,
                                 std::vector<Tensor> parents,
                                 std::function<void(const detail::TensorNode&)> backward_fn);
};

// --- graph construction helpers -------------------------------------------

// Thread-local switch; while disabled, ops produce detached leaves (forward
// values only). Used by evaluation loops and finite-difference probes.
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// --- differentiable ops ----------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Same shape, or b's shape a trailing suffix of a's (bias-add style).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor gelu(const Tensor& a);

// Row-wise softmax over the last dimension of a rank-2 tensor.
Tensor softmax_rows(const Tensor& a);

// Per-row normalization over the last dimension: mean 0, variance 1
// (population variance, epsilon inside the sqrt), then affine gain/bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

Tensor mean_square(const Tensor& a); // scalar
Tensor sum_all(const Tensor& a);     // scalar

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, int row_begin, int row_end);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, int col_begin, int col_end);

// Adds a large negative constant to score entries with column > row, so a
// subsequent row softmax sends them to exactly zero.
Tensor causal_mask_add(const Tensor& scores);

// Gathers rows of `table` by index. Gradient scatters back into the table
// when it is trainable.
Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids);

Tensor reshape(const Tensor& a, Shape new_shape);

// --- backward & checks -------------------------------------------------------

// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate additively
// across calls until zero_grad; intermediate buffers are transient. A loss
// with no trainable ancestors is a no-op.
void backward(const Tensor& loss);

// Central-difference comparison against autodiff gradients for every element
// of every tensor in `params` (which must be leaves f() reads). Returns the
// worst relative error with denominator max(|g|, 1e-8).
double finite_diff_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                         double eps);

// --- initialization ----------------------------------------------------------

struct Init {
    enum class Kind { Zeros, Uniform, Gaussian };
    Kind kind = Kind::Zeros;
    double lo = 0.0, hi = 0.0; // uniform bounds
    double sigma = 0.0;        // gaussian

    static Init zeros() { return {}; }
    static Init uniform(double lo, double hi) {
        Init i;
        i.kind = Kind::Uniform;
        i.lo = lo;
        i.hi = hi;
        return i;
    }
    static Init gaussian(double sigma) {
        Init i;
        i.kind = Kind::Gaussian;
        i.sigma = sigma;
        return i;
    }
};

Tensor seeded_init(Shape shape, const Init& scheme, Rng& rng, bool requires_grad = false);

// Throws numeric_error naming `where` if any element is NaN/Inf.
void check_finite(const Tensor& t, const std::string& where);

} // namespace unicast

#include "unicast/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>

namespace unicast {

namespace {

std::atomic<uint64_t> g_next_id{1};

thread_local bool g_grad_enabled = true;

constexpr double kMaskValue = -1e30;
constexpr double kGeluK = 0.79788456080286535588; // sqrt(2/pi)
constexpr double kGeluC = 0.044715;

// c[m,n] += a[m,k] * b[k,n]
void mm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            const double av = arow[l];
            const double* brow = b + static_cast<size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// c[m,k] += a[m,n] * b[k,n]^T   (rows of a dotted with rows of b)
void mm_nt(const double* a, const double* b, double* c, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * n;
        double* crow = c + static_cast<size_t>(i) * k;
        for (int l = 0; l < k; ++l) {
            const double* brow = b + static_cast<size_t>(l) * n;
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += arow[j] * brow[j];
            crow[l] += s;
        }
    }
}

// c[k,n] += a[m,k]^T * b[m,n]
void mm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        const double* brow = b + static_cast<size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            const double av = arow[l];
            double* crow = c + static_cast<size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void require_rank2(const Tensor& t, const char* op) {
    if (t.shape().size() > 2) {
        throw dimension_error(std::string(op) + ": expected rank <= 2, got shape " + shape_str(t.shape()));
    }
}

bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    for (size_t i = 0; i < small.size(); ++i) {
        if (small[small.size() - 1 - i] != big[big.size() - 1 - i]) return false;
    }
    return true;
}

} // namespace

namespace detail {

void TensorNode::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

} // namespace detail

using detail::TensorNode;

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

// --- Tensor -----------------------------------------------------------------

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape.empty()) throw dimension_error("tensor: empty shape");
    for (int d : shape) {
        if (d <= 0) throw dimension_error("tensor: non-positive dimension in " + shape_str(shape));
    }
    if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
        throw dimension_error("tensor: shape " + shape_str(shape) + " wants " +
                              std::to_string(shape_numel(shape)) + " values, got " +
                              std::to_string(data.size()));
    }
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    n->is_leaf = true;
    n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> d(static_cast<size_t>(shape_numel(shape)), 0.0);
    return from_data(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> d(static_cast<size_t>(shape_numel(shape)), value);
    return from_data(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
    if (!node_) throw contract_error("tensor: undefined handle");
    return node_->shape;
}

int64_t Tensor::size() const { return shape_numel(shape()); }

int Tensor::rows() const {
    const Shape& s = shape();
    if (s.size() == 2) return s[0];
    if (s.size() == 1) return 1;
    throw dimension_error("tensor: rows() on shape " + shape_str(s));
}

int Tensor::cols() const {
    const Shape& s = shape();
    if (s.size() == 2) return s[1];
    if (s.size() == 1) return s[0];
    throw dimension_error("tensor: cols() on shape " + shape_str(s));
}

const std::vector<double>& Tensor::values() const {
    if (!node_) throw contract_error("tensor: undefined handle");
    return node_->data;
}

double Tensor::value() const {
    if (size() != 1) throw contract_error("tensor: value() on non-scalar shape " + shape_str(shape()));
    return node_->data[0];
}

double Tensor::at(int64_t i) const {
    const auto& d = values();
    if (i < 0 || i >= static_cast<int64_t>(d.size())) {
        throw contract_error("tensor: flat index " + std::to_string(i) + " out of range");
    }
    return d[static_cast<size_t>(i)];
}

double Tensor::at(int i, int j) const {
    require_rank2(*this, "at");
    return at(static_cast<int64_t>(i) * cols() + j);
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_ && node_->is_leaf; }

uint64_t Tensor::id() const {
    if (!node_) throw contract_error("tensor: undefined handle");
    return node_->id;
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->data.size(); }

const std::vector<double>& Tensor::grad() const {
    if (!has_grad()) throw contract_error("tensor: no gradient present");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_) node_->grad.clear();
}

std::vector<double>& Tensor::mutable_data() {
    if (!node_) throw contract_error("tensor: undefined handle");
    if (!node_->is_leaf) throw contract_error("tensor: in-place writes are leaf-only");
    return node_->data;
}

// --- grad mode ----------------------------------------------------------------

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

// --- op plumbing ----------------------------------------------------------------

Tensor make_op_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                      std::function<void(const TensorNode&)> backward_fn) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    n->requires_grad = true;
    n->is_leaf = false;
    n->parents.reserve(parents.size());
    for (const Tensor& p : parents) n->parents.push_back(p.node());
    n->backward_fn = std::move(backward_fn);
    return Tensor(std::move(n));
}

namespace {

bool wants_grad(std::initializer_list<const Tensor*> ts) {
    if (!g_grad_enabled) return false;
    for (const Tensor* t : ts) {
        if (t->requires_grad()) return true;
    }
    return false;
}

} // namespace

// --- ops -----------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2) {
        throw dimension_error("matmul: expects rank-2 operands, got " + shape_str(a.shape()) +
                              " x " + shape_str(b.shape()));
    }
    const int m = a.rows(), k = a.cols(), n = b.cols();
    if (k != b.rows()) {
        throw dimension_error("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                              " x " + shape_str(b.shape()));
    }
    std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
    mm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);

    if (!wants_grad({&a, &b})) return Tensor::from_data({m, n}, std::move(out));
    return make_op_result({m, n}, std::move(out), {a, b}, [a, b, m, k, n](const TensorNode& o) {
        auto pa = a.node();
        auto pb = b.node();
        if (pa->requires_grad) {
            pa->ensure_grad();
            mm_nt(o.grad.data(), pb->data.data(), pa->grad.data(), m, n, k);
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            mm_tn(pa->data.data(), o.grad.data(), pb->grad.data(), m, k, n);
        }
    });
}

Tensor transpose(const Tensor& a) {
    if (a.shape().size() != 2) {
        throw dimension_error("transpose: expects rank-2, got " + shape_str(a.shape()));
    }
    const int m = a.rows(), n = a.cols();
    std::vector<double> out(static_cast<size_t>(m) * n);
    const auto& ad = a.values();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<size_t>(j) * m + i] = ad[static_cast<size_t>(i) * n + j];

    if (!wants_grad({&a})) return Tensor::from_data({n, m}, std::move(out));
    return make_op_result({n, m}, std::move(out), {a}, [a, m, n](const TensorNode& o) {
        auto pa = a.node();
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < m; ++i)
                pa->grad[static_cast<size_t>(i) * n + j] += o.grad[static_cast<size_t>(j) * m + i];
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!is_suffix(b.shape(), a.shape())) {
        throw dimension_error("add: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                              " are not trailing-broadcast compatible");
    }
    const size_t na = a.values().size(), nb = b.values().size();
    std::vector<double> out(na);
    const auto& ad = a.values();
    const auto& bd = b.values();
    for (size_t i = 0; i < na; ++i) out[i] = ad[i] + bd[i % nb];

    if (!wants_grad({&a, &b})) return Tensor::from_data(a.shape(), std::move(out));
    return make_op_result(a.shape(), std::move(out), {a, b}, [a, b, na, nb](const TensorNode& o) {
        auto pa = a.node();
        auto pb = b.node();
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < na; ++i) pa->grad[i] += o.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < na; ++i) pb->grad[i % nb] += o.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw dimension_error("sub: shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    const size_t n = a.values().size();
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = a.values()[i] - b.values()[i];

    if (!wants_grad({&a, &b})) return Tensor::from_data(a.shape(), std::move(out));
    return make_op_result(a.shape(), std::move(out), {a, b}, [a, b, n](const TensorNode& o) {
        auto pa = a.node();
        auto pb = b.node();
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < n; ++i) pa->grad[i] += o.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < n; ++i) pb->grad[i] -= o.grad[i];
        }
    });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw dimension_error("hadamard: shapes differ: " + shape_str(a.shape()) + " vs " +
                              shape_str(b.shape()));
    }
    const size_t n = a.values().size();
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = a.values()[i] * b.values()[i];

    if (!wants_grad({&a, &b})) return Tensor::from_data(a.shape(), std::move(out));
    return make_op_result(a.shape(), std::move(out), {a, b}, [a, b, n](const TensorNode& o) {
        auto pa = a.node();
        auto pb = b.node();
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < n; ++i) pa->grad[i] += o.grad[i] * pb->data[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < n; ++i) pb->grad[i] += o.grad[i] * pa->data[i];
        }
    });
}

Tensor scale(const Tensor& a, double c) {
    const size_t n = a.values().size();
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = a.values()[i] * c;

    if (!wants_grad({&a})) return Tensor::from_data(a.shape(), std::move(out));
    return make_op_result(a.shape(), std::move(out), {a}, [a, c, n](const TensorNode& o) {
        auto pa = a.node();
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (size_t i = 0; i < n; ++i) pa->grad[i] += o.grad[i] * c;
    });
}

Tensor gelu(const Tensor& a) {
    const size_t n = a.values().size();
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) {
        const double x = a.values()[i];
        const double u = kGeluK * (x + kGeluC * x * x * x);
        out[i] = 0.5 * x * (1.0 + std::tanh(u));
    }

    if (!wants_grad({&a})) return Tensor::from_data(a.shape(), std::move(out));
    return make_op_result(a.shape(), std::move(out), {a}, [a, n](const TensorNode& o) {
        auto pa = a.node();
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (size_t i = 0; i < n; ++i) {
            const double x = pa->data[i];
            const double u = kGeluK * (x + kGeluC * x * x * x);
            const double t = std::tanh(u);
            const double du = kGeluK * (1.0 + 3.0 * kGeluC * x * x);
            const double d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
            pa->grad[i] += o.grad[i] * d;
        }
    });
}

Tensor softmax_rows(const Tensor& a) {
    require_rank2(a, "softmax_rows");
    const int rows = a.rows(), cols = a.cols();
    std::vector<double> out(a.values().size());
    const auto& ad = a.values();
    for (int r = 0; r < rows; ++r) {
        const double* x = ad.data() + static_cast<size_t>(r) * cols;
        double* y = out.data() + static_cast<size_t>(r) * cols;
        double mx = x[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (int j = 0; j < cols; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        const double inv = 1.0 / sum;
        for (int j = 0; j < cols; ++j) y[j] *= inv;
    }

    if (!wants_grad({&a})) return Tensor::from_data(a.shape(), std::move(out));
    return make_op_result(a.shape(), std::move(out), {a}, [a, rows, cols](const TensorNode& o) {
        auto pa = a.node();
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            const double* y = o.data.data() + static_cast<size_t>(r) * cols;
            const double* dy = o.grad.data() + static_cast<size_t>(r) * cols;
            double* dx = pa->grad.data() + static_cast<size_t>(r) * cols;
            double dot = 0.0;
            for (int j = 0; j < cols; ++j) dot += dy[j] * y[j];
            for (int j = 0; j < cols; ++j) dx[j] += y[j] * (dy[j] - dot);
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    require_rank2(x, "layer_norm");
    const int rows = x.rows(), cols = x.cols();
    if (gain.size() != cols || bias.size() != cols) {
        throw dimension_error("layer_norm: gain/bias size must match width " + std::to_string(cols) +
                              ", got " + shape_str(gain.shape()) + " / " + shape_str(bias.shape()));
    }
    std::vector<double> out(x.values().size());
    std::vector<double> xhat(x.values().size());
    std::vector<double> inv_s(static_cast<size_t>(rows));
    const auto& xd = x.values();
    const auto& gd = gain.values();
    const auto& bd = bias.values();
    for (int r = 0; r < rows; ++r) {
        const double* xr = xd.data() + static_cast<size_t>(r) * cols;
        double mu = 0.0;
        for (int j = 0; j < cols; ++j) mu += xr[j];
        mu /= cols;
        double var = 0.0;
        for (int j = 0; j < cols; ++j) {
            const double d = xr[j] - mu;
            var += d * d;
        }
        var /= cols;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_s[static_cast<size_t>(r)] = is;
        double* xh = xhat.data() + static_cast<size_t>(r) * cols;
        double* yr = out.data() + static_cast<size_t>(r) * cols;
        for (int j = 0; j < cols; ++j) {
            xh[j] = (xr[j] - mu) * is;
            yr[j] = gd[j] * xh[j] + bd[j];
        }
    }

    if (!wants_grad({&x, &gain, &bias})) return Tensor::from_data(x.shape(), std::move(out));
    return make_op_result(
        x.shape(), std::move(out), {x, gain, bias},
        [x, gain, bias, rows, cols, xhat = std::move(xhat), inv_s = std::move(inv_s)](const TensorNode& o) {
            auto px = x.node();
            auto pg = gain.node();
            auto pb = bias.node();
            if (pg->requires_grad) pg->ensure_grad();
            if (pb->requires_grad) pb->ensure_grad();
            if (px->requires_grad) px->ensure_grad();
            for (int r = 0; r < rows; ++r) {
                const double* dy = o.grad.data() + static_cast<size_t>(r) * cols;
                const double* xh = xhat.data() + static_cast<size_t>(r) * cols;
                if (pg->requires_grad) {
                    for (int j = 0; j < cols; ++j) pg->grad[j] += dy[j] * xh[j];
                }
                if (pb->requires_grad) {
                    for (int j = 0; j < cols; ++j) pb->grad[j] += dy[j];
                }
                if (px->requires_grad) {
                    const double is = inv_s[static_cast<size_t>(r)];
                    double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                    for (int j = 0; j < cols; ++j) {
                        const double dxh = dy[j] * pg->data[j];
                        mean_dxh += dxh;
                        mean_dxh_xh += dxh * xh[j];
                    }
                    mean_dxh /= cols;
                    mean_dxh_xh /= cols;
                    double* dx = px->grad.data() + static_cast<size_t>(r) * cols;
                    for (int j = 0; j < cols; ++j) {
                        const double dxh = dy[j] * pg->data[j];
                        dx[j] += is * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
                    }
                }
            }
        });
}

Tensor mean_square(const Tensor& a) {
    const size_t n = a.values().size();
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    s /= static_cast<double>(n);

    if (!wants_grad({&a})) return Tensor::scalar(s);
    return make_op_result({1}, {s}, {a}, [a, n](const TensorNode& o) {
        auto pa = a.node();
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        const double c = 2.0 / static_cast<double>(n) * o.grad[0];
        for (size_t i = 0; i < n; ++i) pa->grad[i] += c * pa->data[i];
    });
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;

    if (!wants_grad({&a})) return Tensor::scalar(s);
    const size_t n = a.values().size();
    return make_op_result({1}, {s}, {a}, [a, n](const TensorNode& o) {
        auto pa = a.node();
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (size_t i = 0; i < n; ++i) pa->grad[i] += o.grad[0];
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw contract_error("concat_rows: no parts");
    int cols = -1, total_rows = 0;
    for (const Tensor& p : parts) {
        if (p.shape().size() != 2) {
            throw dimension_error("concat_rows: expects rank-2 parts, got " + shape_str(p.shape()));
        }
        if (cols < 0) cols = p.cols();
        if (p.cols() != cols) {
            throw dimension_error("concat_rows: column mismatch: " + std::to_string(cols) + " vs " +
                                  std::to_string(p.cols()));
        }
        total_rows += p.rows();
    }
    std::vector<double> out;
    out.reserve(static_cast<size_t>(total_rows) * cols);
    for (const Tensor& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());

    bool ng = false;
    if (g_grad_enabled) {
        for (const Tensor& p : parts) ng = ng || p.requires_grad();
    }
    if (!ng) return Tensor::from_data({total_rows, cols}, std::move(out));
    return make_op_result({total_rows, cols}, std::move(out), parts, [parts](const TensorNode& o) {
        size_t off = 0;
        for (const Tensor& p : parts) {
            auto pn = p.node();
            const size_t n = pn->data.size();
            if (pn->requires_grad) {
                pn->ensure_grad();
                for (size_t i = 0; i < n; ++i) pn->grad[i] += o.grad[off + i];
            }
            off += n;
        }
    });
}

Tensor slice_rows(const Tensor& a, int row_begin, int row_end) {
    if (a.shape().size() != 2) {
        throw dimension_error("slice_rows: expects rank-2, got " + shape_str(a.shape()));
    }
    const int rows = a.rows(), cols = a.cols();
    if (row_begin < 0 || row_end > rows || row_begin >= row_end) {
        throw contract_error("slice_rows: range [" + std::to_string(row_begin) + "," +
                             std::to_string(row_end) + ") invalid for " + std::to_string(rows) + " rows");
    }
    const int out_rows = row_end - row_begin;
    std::vector<double> out(a.values().begin() + static_cast<size_t>(row_begin) * cols,
                            a.values().begin() + static_cast<size_t>(row_end) * cols);

    if (!wants_grad({&a})) return Tensor::from_data({out_rows, cols}, std::move(out));
    return make_op_result({out_rows, cols}, std::move(out), {a},
                          [a, row_begin, cols, out_rows](const TensorNode& o) {
                              auto pa = a.node();
                              if (!pa->requires_grad) return;
                              pa->ensure_grad();
                              const size_t base = static_cast<size_t>(row_begin) * cols;
                              const size_t n = static_cast<size_t>(out_rows) * cols;
                              for (size_t i = 0; i < n; ++i) pa->grad[base + i] += o.grad[i];
                          });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw contract_error("concat_cols: no parts");
    int rows = -1, total_cols = 0;
    for (const Tensor& p : parts) {
        if (p.shape().size() != 2) {
            throw dimension_error("concat_cols: expects rank-2 parts, got " + shape_str(p.shape()));
        }
        if (rows < 0) rows = p.rows();
        if (p.rows() != rows) {
            throw dimension_error("concat_cols: row mismatch: " + std::to_string(rows) + " vs " +
                                  std::to_string(p.rows()));
        }
        total_cols += p.cols();
    }
    std::vector<double> out(static_cast<size_t>(rows) * total_cols);
    int coff = 0;
    for (const Tensor& p : parts) {
        const int pc = p.cols();
        for (int r = 0; r < rows; ++r) {
            const double* src = p.values().data() + static_cast<size_t>(r) * pc;
            double* dst = out.data() + static_cast<size_t>(r) * total_cols + coff;
            std::memcpy(dst, src, sizeof(double) * static_cast<size_t>(pc));
        }
        coff += pc;
    }

    bool ng = false;
    if (g_grad_enabled) {
        for (const Tensor& p : parts) ng = ng || p.requires_grad();
    }
    if (!ng) return Tensor::from_data({rows, total_cols}, std::move(out));
    return make_op_result({rows, total_cols}, std::move(out), parts,
                          [parts, rows, total_cols](const TensorNode& o) {
                              int coff = 0;
                              for (const Tensor& p : parts) {
                                  auto pn = p.node();
                                  const int pc = pn->shape[1];
                                  if (pn->requires_grad) {
                                      pn->ensure_grad();
                                      for (int r = 0; r < rows; ++r) {
                                          const double* g = o.grad.data() +
                                                            static_cast<size_t>(r) * total_cols + coff;
                                          double* dst = pn->grad.data() + static_cast<size_t>(r) * pc;
                                          for (int j = 0; j < pc; ++j) dst[j] += g[j];
                                      }
                                  }
                                  coff += pc;
                              }
                          });
}

Tensor slice_cols(const Tensor& a, int col_begin, int col_end) {
    if (a.shape().size() != 2) {
        throw dimension_error("slice_cols: expects rank-2, got " + shape_str(a.shape()));
    }
    const int rows = a.rows(), cols = a.cols();
    if (col_begin < 0 || col_end > cols || col_begin >= col_end) {
        throw contract_error("slice_cols: range [" + std::to_string(col_begin) + "," +
                             std::to_string(col_end) + ") invalid for " + std::to_string(cols) + " cols");
    }
    const int oc = col_end - col_begin;
    std::vector<double> out(static_cast<size_t>(rows) * oc);
    for (int r = 0; r < rows; ++r) {
        const double* src = a.values().data() + static_cast<size_t>(r) * cols + col_begin;
        std::memcpy(out.data() + static_cast<size_t>(r) * oc, src, sizeof(double) * static_cast<size_t>(oc));
    }

    if (!wants_grad({&a})) return Tensor::from_data({rows, oc}, std::move(out));
    return make_op_result({rows, oc}, std::move(out), {a},
                          [a, rows, cols, col_begin, oc](const TensorNode& o) {
                              auto pa = a.node();
                              if (!pa->requires_grad) return;
                              pa->ensure_grad();
                              for (int r = 0; r < rows; ++r) {
                                  const double* g = o.grad.data() + static_cast<size_t>(r) * oc;
                                  double* dst = pa->grad.data() + static_cast<size_t>(r) * cols + col_begin;
                                  for (int j = 0; j < oc; ++j) dst[j] += g[j];
                              }
                          });
}

Tensor causal_mask_add(const Tensor& scores) {
    if (scores.shape().size() != 2) {
        throw dimension_error("causal_mask_add: expects rank-2, got " + shape_str(scores.shape()));
    }
    const int rows = scores.rows(), cols = scores.cols();
    std::vector<double> out = scores.values();
    for (int r = 0; r < rows; ++r) {
        for (int j = r + 1; j < cols; ++j) out[static_cast<size_t>(r) * cols + j] += kMaskValue;
    }

    if (!wants_grad({&scores})) return Tensor::from_data(scores.shape(), std::move(out));
    const size_t n = out.size();
    return make_op_result(scores.shape(), std::move(out), {scores}, [scores, n](const TensorNode& o) {
        auto pa = scores.node();
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (size_t i = 0; i < n; ++i) pa->grad[i] += o.grad[i];
    });
}

Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids) {
    if (table.shape().size() != 2) {
        throw dimension_error("embedding_rows: table must be rank-2, got " + shape_str(table.shape()));
    }
    if (ids.empty()) throw input_error("embedding_rows: empty id sequence");
    const int vocab = table.rows(), d = table.cols();
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= vocab) {
            throw input_error("embedding_rows: id " + std::to_string(ids[i]) + " at position " +
                              std::to_string(i) + " outside vocab of " + std::to_string(vocab));
        }
    }
    const int s = static_cast<int>(ids.size());
    std::vector<double> out(static_cast<size_t>(s) * d);
    for (int r = 0; r < s; ++r) {
        const double* src = table.values().data() + static_cast<size_t>(ids[static_cast<size_t>(r)]) * d;
        std::memcpy(out.data() + static_cast<size_t>(r) * d, src, sizeof(double) * static_cast<size_t>(d));
    }

    if (!wants_grad({&table})) return Tensor::from_data({s, d}, std::move(out));
    return make_op_result({s, d}, std::move(out), {table}, [table, ids, d](const TensorNode& o) {
        auto pt = table.node();
        if (!pt->requires_grad) return;
        pt->ensure_grad();
        for (size_t r = 0; r < ids.size(); ++r) {
            const double* g = o.grad.data() + r * static_cast<size_t>(d);
            double* dst = pt->grad.data() + static_cast<size_t>(ids[r]) * d;
            for (int j = 0; j < d; ++j) dst[j] += g[j];
        }
    });
}

Tensor reshape(const Tensor& a, Shape new_shape) {
    if (shape_numel(new_shape) != a.size()) {
        throw dimension_error("reshape: cannot view " + shape_str(a.shape()) + " as " +
                              shape_str(new_shape));
    }
    std::vector<double> out = a.values();
    if (!wants_grad({&a})) return Tensor::from_data(std::move(new_shape), std::move(out));
    const size_t n = out.size();
    return make_op_result(std::move(new_shape), std::move(out), {a}, [a, n](const TensorNode& o) {
        auto pa = a.node();
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (size_t i = 0; i < n; ++i) pa->grad[i] += o.grad[i];
    });
}

// --- backward ---------------------------------------------------------------------

void backward(const Tensor& loss) {
    if (!loss.defined()) throw contract_error("backward: undefined loss");
    if (loss.size() != 1) {
        throw contract_error("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    }
    if (!loss.requires_grad()) return; // nothing trainable upstream

    // Post-order DFS so every node appears after all of its inputs.
    std::vector<TensorNode*> topo;
    std::unordered_set<TensorNode*> seen;
    struct Frame {
        TensorNode* node;
        size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({loss.node().get(), 0});
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            TensorNode* p = f.node->parents[f.next_parent++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            topo.push_back(f.node);
            stack.pop_back();
        }
    }

    // Intermediate grads are transient per sweep; leaf grads accumulate.
    for (TensorNode* n : topo) {
        if (n->is_leaf) {
            n->ensure_grad();
        } else {
            n->grad.assign(n->data.size(), 0.0);
        }
    }
    loss.node()->grad[0] += 1.0;

    for (size_t i = topo.size(); i-- > 0;) {
        TensorNode* n = topo[i];
        if (n->backward_fn) n->backward_fn(*n);
    }
}

double finite_diff_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                         double eps) {
    if (eps <= 0.0) throw contract_error("finite_diff_check: eps must be positive");
    for (const Tensor& p : params) {
        if (!p.is_leaf()) throw contract_error("finite_diff_check: params must be leaves");
    }

    std::vector<std::vector<double>> grads(params.size());
    {
        for (const Tensor& p : params) const_cast<Tensor&>(p).zero_grad();
        Tensor y = f();
        if (y.size() != 1) throw contract_error("finite_diff_check: f must return a scalar");
        backward(y);
        for (size_t i = 0; i < params.size(); ++i) {
            grads[i] = params[i].has_grad() ? params[i].grad()
                                            : std::vector<double>(params[i].values().size(), 0.0);
        }
        for (const Tensor& p : params) const_cast<Tensor&>(p).zero_grad();
    }

    double max_rel = 0.0;
    NoGradGuard ng;
    for (size_t i = 0; i < params.size(); ++i) {
        auto& data = const_cast<Tensor&>(params[i]).mutable_data();
        for (size_t j = 0; j < data.size(); ++j) {
            const double v = data[j];
            data[j] = v + eps;
            const double f_plus = f().value();
            data[j] = v - eps;
            const double f_minus = f().value();
            data[j] = v;
            const double fd = (f_plus - f_minus) / (2.0 * eps);
            const double g = grads[i][j];
            const double rel = std::abs(fd - g) / std::max(std::abs(g), 1e-8);
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

// --- init ------------------------------------------------------------------------

Tensor seeded_init(Shape shape, const Init& scheme, Rng& rng, bool requires_grad) {
    const int64_t n = shape_numel(shape);
    std::vector<double> data(static_cast<size_t>(n));
    switch (scheme.kind) {
        case Init::Kind::Zeros:
            break;
        case Init::Kind::Uniform:
            for (auto& v : data) v = rng.next_uniform(scheme.lo, scheme.hi);
            break;
        case Init::Kind::Gaussian:
            for (auto& v : data) v = rng.next_gaussian(scheme.sigma);
            break;
        default:
            throw config_error("seeded_init: unknown scheme");
    }
    return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

void check_finite(const Tensor& t, const std::string& where) {
    const auto& d = t.values();
    for (size_t i = 0; i < d.size(); ++i) {
        if (!std::isfinite(d[i])) {
            throw numeric_error(where + ": non-finite value at flat index " + std::to_string(i));
        }
    }
}

} // namespace unicast

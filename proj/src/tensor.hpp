#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace genmc {

struct TensorNode;
class Tensor;

// Thread-local switch that suppresses graph recording, e.g. during greedy
// decoding or evaluation. Ops still compute values, they just do not link
// parents or backward closures.
class GradMode {
public:
    static bool enabled();
    static void set_enabled(bool on);
};

struct NoGradGuard {
    NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set_enabled(false); }
    ~NoGradGuard() { GradMode::set_enabled(prev_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// One node of the reverse-mode graph. Values are 64-bit floats in row-major
// order; rank is 1 or 2. `backward` receives the node itself so closures
// never capture their own node (that would leak the graph).
struct TensorNode {
    std::vector<long> shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized lazily; empty means "all zero"
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward;

    long numel() const {
        long n = 1;
        for (long d : shape) n *= d;
        return n;
    }
    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
    }
};

// Value-semantics handle onto a graph node. Copying a Tensor aliases the
// node; tensors are immutable after creation except for their grad buffer
// (and in-place parameter updates done by the optimizer between graphs).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor zeros(std::vector<long> shape, bool requires_grad = false);
    static Tensor full(std::vector<long> shape, double value, bool requires_grad = false);
    static Tensor from_data(std::vector<long> shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double value);
    // i.i.d. normal entries, used for parameter init
    static Tensor randn(std::vector<long> shape, Rng& rng, double stddev,
                        bool requires_grad = true);

    bool defined() const { return node_ != nullptr; }
    const std::vector<long>& shape() const { return node_->shape; }
    long rank() const { return static_cast<long>(node_->shape.size()); }
    long rows() const;
    long cols() const;
    long numel() const { return node_->numel(); }

    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }
    double item() const;
    double at(long i) const;
    double at(long r, long c) const;

    bool requires_grad() const { return node_->requires_grad; }
    const std::vector<double>& grad() const;
    bool has_grad() const { return !node_->grad.empty(); }
    void zero_grad();

    // Same values, no history: backward never crosses this boundary.
    Tensor detach() const;

    // Reverse-mode sweep from a scalar. Gradients accumulate; callers zero
    // them explicitly between steps.
    void backward() const;

    std::shared_ptr<TensorNode> node() const { return node_; }
    TensorNode* raw() const { return node_.get(); }

private:
    std::shared_ptr<TensorNode> node_;
};

// Topologically ordered record of the operations reachable from a root.
// Every node's parents precede it in `order`; backward walks it in reverse,
// visiting each node exactly once.
struct Graph {
    std::vector<TensorNode*> order;
    static Graph build(const Tensor& root);
};

// ---- ops -------------------------------------------------------------

// a[m,k] x b[k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// elementwise, same shape
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
// W[out,in] x x[in,L] + b[out] broadcast over columns (x may be rank 1)
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
// max-subtracted softmax along `axis`; each slice sums to 1
Tensor softmax(const Tensor& a, int axis);
// per-column normalization of x[d,L] (or a single rank-1 vector)
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);
// -log softmax(logits)[target], rank-1 logits, computed in log space
Tensor cross_entropy_from_logits(const Tensor& logits, long target);
// per-row max over time of h[d,L]; gradient goes to the first argmax
Tensor max_pool_time(const Tensor& h);
// columns of a then columns of b; either side may have zero columns
Tensor concat_time(const Tensor& a, const Tensor& b);
// concatenate along axis 0: rank-1 vectors end to end, or rank-2 blocks
// stacked by rows (equal column counts)
Tensor concat_rows(const std::vector<Tensor>& parts);
// same data, new shape with identical element count
Tensor reshape(const Tensor& a, std::vector<long> shape);
// rows of table[V,d] gathered as columns -> [d,L]; scatter-add backward
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);
// slice of rows [r0, r1) of a rank-2 tensor
Tensor slice_rows(const Tensor& a, long r0, long r1);
Tensor select_column(const Tensor& a, long j);
Tensor sum(const Tensor& a);

namespace detail {
std::string shape_str(const std::vector<long>& shape);
}

// Kink diagnostics for the gradient suite: finite-difference checks are only
// valid away from relu zeros and max-pool ties, so forwards record how close
// they came. Thread-local, reset explicitly.
namespace diag {
void reset_kink_margins();
double relu_min_abs_input();
double pool_min_gap();
}  // namespace diag

}  // namespace genmc

#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace genmc {

namespace {

thread_local bool g_grad_enabled = true;
thread_local double g_relu_min_abs = std::numeric_limits<double>::infinity();
thread_local double g_pool_min_gap = std::numeric_limits<double>::infinity();

std::shared_ptr<TensorNode> make_node(std::vector<long> shape, std::vector<double> data,
                                      const char* op) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->op = op;
    return n;
}

bool track(std::initializer_list<const Tensor*> inputs) {
    if (!GradMode::enabled()) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

void check_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2)
        throw DimensionError(std::string(op) + ": expected rank-2 tensor, got shape " +
                             detail::shape_str(t.shape()));
}

}  // namespace

namespace detail {
std::string shape_str(const std::vector<long>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}
}  // namespace detail

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set_enabled(bool on) { g_grad_enabled = on; }

namespace diag {
void reset_kink_margins() {
    g_relu_min_abs = std::numeric_limits<double>::infinity();
    g_pool_min_gap = std::numeric_limits<double>::infinity();
}
double relu_min_abs_input() { return g_relu_min_abs; }
double pool_min_gap() { return g_pool_min_gap; }
}  // namespace diag

// ---- Tensor ------------------------------------------------------------

Tensor Tensor::zeros(std::vector<long> shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<long> shape, double value, bool requires_grad) {
    long n = 1;
    for (long d : shape) {
        if (d < 0) throw DimensionError("negative dimension in shape " + detail::shape_str(shape));
        n *= d;
    }
    auto node = make_node(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value),
                          "leaf");
    node->requires_grad = requires_grad;
    return Tensor(node);
}

Tensor Tensor::from_data(std::vector<long> shape, std::vector<double> data, bool requires_grad) {
    long n = 1;
    for (long d : shape) n *= d;
    if (static_cast<std::size_t>(n) != data.size())
        throw DimensionError("data length " + std::to_string(data.size()) +
                             " does not match shape " + detail::shape_str(shape));
    auto node = make_node(std::move(shape), std::move(data), "leaf");
    node->requires_grad = requires_grad;
    return Tensor(node);
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor Tensor::randn(std::vector<long> shape, Rng& rng, double stddev, bool requires_grad) {
    long n = 1;
    for (long d : shape) n *= d;
    std::vector<double> data(static_cast<std::size_t>(n));
    for (double& v : data) v = rng.next_normal(0.0, stddev);
    return from_data(std::move(shape), std::move(data), requires_grad);
}

long Tensor::rows() const {
    return node_->shape.empty() ? 0 : node_->shape[0];
}

long Tensor::cols() const {
    if (rank() != 2) throw DimensionError("cols() on non-matrix shape " + detail::shape_str(shape()));
    return node_->shape[1];
}

double Tensor::item() const {
    if (numel() != 1)
        throw ContractError("item() requires a scalar, got shape " + detail::shape_str(shape()));
    return node_->data[0];
}

double Tensor::at(long i) const { return node_->data.at(static_cast<std::size_t>(i)); }

double Tensor::at(long r, long c) const {
    check_rank2(*this, "at");
    return node_->data.at(static_cast<std::size_t>(r * cols() + c));
}

const std::vector<double>& Tensor::grad() const {
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    auto node = make_node(node_->shape, node_->data, "detach");
    node->requires_grad = false;
    return Tensor(node);
}

// ---- graph / backward ----------------------------------------------------

Graph Graph::build(const Tensor& root) {
    Graph g;
    std::unordered_set<TensorNode*> visited;
    // iterative post-order DFS; child is emitted after all of its parents
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(root.raw(), 0);
    visited.insert(root.raw());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* p = node->parents[next++].get();
            if (!visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            g.order.push_back(node);
            stack.pop_back();
        }
    }
    return g;
}

void Tensor::backward() const {
    if (numel() != 1)
        throw ContractError("backward() requires a scalar loss, got shape " +
                            detail::shape_str(shape()));
    Graph g = Graph::build(*this);
    // Leaves accumulate across sweeps; interior nodes carry per-sweep flow
    // only, so a repeated backward doubles leaf grads exactly.
    for (TensorNode* n : g.order)
        if (n->backward && !n->grad.empty()) std::fill(n->grad.begin(), n->grad.end(), 0.0);
    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = g.order.rbegin(); it != g.order.rend(); ++it) {
        TensorNode* n = *it;
        if (!n->backward) continue;
        if (n->grad.empty()) continue;  // unreachable from the loss
        for (double v : n->grad)
            if (!std::isfinite(v))
                throw NumericError(std::string("backward: non-finite gradient at op '") + n->op +
                                   "'");
        n->backward(*n);
    }
}

// ---- op helpers ------------------------------------------------------------

namespace {

Tensor finish(std::shared_ptr<TensorNode> node, bool tracked,
              std::initializer_list<const Tensor*> inputs,
              std::function<void(TensorNode&)> backward) {
    if (tracked) {
        node->requires_grad = true;
        for (const Tensor* t : inputs) node->parents.push_back(t->node());
        node->backward = std::move(backward);
    }
    return Tensor(node);
}

// accumulate into a parent grad buffer only when that parent wants gradients
void add_grad(TensorNode& parent, const std::vector<double>& delta) {
    if (!parent.requires_grad) return;
    parent.ensure_grad();
    for (std::size_t i = 0; i < delta.size(); ++i) parent.grad[i] += delta[i];
}

}  // namespace

// ---- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    const long m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
    if (k != k2)
        throw DimensionError("matmul: inner dimensions disagree, " + detail::shape_str(a.shape()) +
                             " x " + detail::shape_str(b.shape()));
    std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    for (long i = 0; i < m; ++i)
        for (long kk = 0; kk < k; ++kk) {
            const double av = pa[i * k + kk];
            if (av == 0.0) continue;
            const double* brow = pb + kk * n;
            double* orow = out.data() + i * n;
            for (long j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    bool tracked = track({&a, &b});
    auto node = make_node({m, n}, std::move(out), "matmul");
    return finish(node, tracked, {&a, &b}, [an = a.node(), bn = b.node(), m, k, n](TensorNode& self) {
        // dA = dC . B^T ; dB = A^T . dC
        if (an->requires_grad) {
            an->ensure_grad();
            for (long i = 0; i < m; ++i)
                for (long kk = 0; kk < k; ++kk) {
                    double acc = 0.0;
                    const double* grow = self.grad.data() + i * n;
                    const double* brow = bn->data.data() + kk * n;
                    for (long j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    an->grad[i * k + kk] += acc;
                }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (long kk = 0; kk < k; ++kk)
                for (long i = 0; i < m; ++i) {
                    const double av = an->data[i * k + kk];
                    if (av == 0.0) continue;
                    const double* grow = self.grad.data() + i * n;
                    double* brow = bn->grad.data() + kk * n;
                    for (long j = 0; j < n; ++j) brow[j] += av * grow[j];
                }
        }
    });
}

Tensor transpose(const Tensor& a) {
    check_rank2(a, "transpose");
    const long r = a.rows(), c = a.cols();
    std::vector<double> out(static_cast<std::size_t>(r * c));
    for (long i = 0; i < r; ++i)
        for (long j = 0; j < c; ++j) out[j * r + i] = a.data()[i * c + j];
    bool tracked = track({&a});
    auto node = make_node({c, r}, std::move(out), "transpose");
    return finish(node, tracked, {&a}, [an = a.node(), r, c](TensorNode& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (long i = 0; i < r; ++i)
            for (long j = 0; j < c; ++j) an->grad[i * c + j] += self.grad[j * r + i];
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError("add: shape mismatch " + detail::shape_str(a.shape()) + " vs " +
                             detail::shape_str(b.shape()));
    std::vector<double> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    bool tracked = track({&a, &b});
    auto node = make_node(a.shape(), std::move(out), "add");
    return finish(node, tracked, {&a, &b}, [an = a.node(), bn = b.node()](TensorNode& self) {
        add_grad(*an, self.grad);
        add_grad(*bn, self.grad);
    });
}

Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
    bool tracked = track({&a});
    auto node = make_node(a.shape(), std::move(out), "scale");
    return finish(node, tracked, {&a}, [an = a.node(), s](TensorNode& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += s * self.grad[i];
    });
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        g_relu_min_abs = std::min(g_relu_min_abs, std::fabs(a.data()[i]));
        out[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
    }
    bool tracked = track({&a});
    auto node = make_node(a.shape(), std::move(out), "relu");
    return finish(node, tracked, {&a}, [an = a.node()](TensorNode& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (an->data[i] > 0.0) an->grad[i] += self.grad[i];
    });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    check_rank2(w, "affine");
    const bool vec = x.rank() == 1;
    const long in = vec ? x.rows() : x.rows();
    const long cols = vec ? 1 : x.cols();
    const long out_dim = w.rows();
    if (w.cols() != in)
        throw DimensionError("affine: weight " + detail::shape_str(w.shape()) +
                             " does not accept input " + detail::shape_str(x.shape()));
    if (b.rank() != 1 || b.rows() != out_dim)
        throw DimensionError("affine: bias " + detail::shape_str(b.shape()) + " does not match " +
                             std::to_string(out_dim) + " outputs");
    std::vector<double> out(static_cast<std::size_t>(out_dim * cols), 0.0);
    for (long i = 0; i < out_dim; ++i) {
        const double* wrow = w.data().data() + i * in;
        for (long kk = 0; kk < in; ++kk) {
            const double wv = wrow[kk];
            if (wv == 0.0) continue;
            const double* xrow = x.data().data() + kk * cols;
            double* orow = out.data() + i * cols;
            for (long j = 0; j < cols; ++j) orow[j] += wv * xrow[j];
        }
        double* orow = out.data() + i * cols;
        for (long j = 0; j < cols; ++j) orow[j] += b.data()[i];
    }
    bool tracked = track({&x, &w, &b});
    std::vector<long> out_shape = vec ? std::vector<long>{out_dim}
                                      : std::vector<long>{out_dim, cols};
    auto node = make_node(std::move(out_shape), std::move(out), "affine");
    return finish(node, tracked, {&x, &w, &b},
                  [xn = x.node(), wn = w.node(), bn = b.node(), in, cols, out_dim](TensorNode& self) {
                      if (xn->requires_grad) {
                          xn->ensure_grad();
                          for (long kk = 0; kk < in; ++kk)
                              for (long i = 0; i < out_dim; ++i) {
                                  const double wv = wn->data[i * in + kk];
                                  if (wv == 0.0) continue;
                                  const double* grow = self.grad.data() + i * cols;
                                  double* xrow = xn->grad.data() + kk * cols;
                                  for (long j = 0; j < cols; ++j) xrow[j] += wv * grow[j];
                              }
                      }
                      if (wn->requires_grad) {
                          wn->ensure_grad();
                          for (long i = 0; i < out_dim; ++i)
                              for (long kk = 0; kk < in; ++kk) {
                                  double acc = 0.0;
                                  const double* grow = self.grad.data() + i * cols;
                                  const double* xrow = xn->data.data() + kk * cols;
                                  for (long j = 0; j < cols; ++j) acc += grow[j] * xrow[j];
                                  wn->grad[i * in + kk] += acc;
                              }
                      }
                      if (bn->requires_grad) {
                          bn->ensure_grad();
                          for (long i = 0; i < out_dim; ++i) {
                              double acc = 0.0;
                              const double* grow = self.grad.data() + i * cols;
                              for (long j = 0; j < cols; ++j) acc += grow[j];
                              bn->grad[i] += acc;
                          }
                      }
                  });
}

Tensor softmax(const Tensor& a, int axis) {
    for (double v : a.data())
        if (std::isnan(v)) throw NumericError("softmax: NaN input");
    long slices, len, stride, step;
    if (a.rank() == 1) {
        if (axis != 0) throw DimensionError("softmax: axis out of range for rank-1 tensor");
        slices = 1, len = a.rows(), stride = 1, step = 0;
    } else {
        check_rank2(a, "softmax");
        if (axis == 1) {  // along each row
            slices = a.rows(), len = a.cols(), stride = 1, step = a.cols();
        } else if (axis == 0) {  // down each column
            slices = a.cols(), len = a.rows(), stride = a.cols(), step = 1;
        } else {
            throw DimensionError("softmax: axis out of range");
        }
    }
    std::vector<double> out(a.data().size());
    for (long s = 0; s < slices; ++s) {
        const double* in = a.data().data() + s * step;
        double* o = out.data() + s * step;
        double mx = in[0];
        for (long i = 1; i < len; ++i) mx = std::max(mx, in[i * stride]);
        double total = 0.0;
        for (long i = 0; i < len; ++i) {
            const double e = std::exp(in[i * stride] - mx);
            o[i * stride] = e;
            total += e;
        }
        for (long i = 0; i < len; ++i) o[i * stride] /= total;
    }
    bool tracked = track({&a});
    auto node = make_node(a.shape(), std::move(out), "softmax");
    return finish(node, tracked, {&a}, [an = a.node(), slices, len, stride, step](TensorNode& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        // dx = s * (dy - sum(s * dy)) per slice
        for (long s = 0; s < slices; ++s) {
            const double* y = self.data.data() + s * step;
            const double* dy = self.grad.data() + s * step;
            double* dx = an->grad.data() + s * step;
            double dot = 0.0;
            for (long i = 0; i < len; ++i) dot += y[i * stride] * dy[i * stride];
            for (long i = 0; i < len; ++i)
                dx[i * stride] += y[i * stride] * (dy[i * stride] - dot);
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (eps <= 0.0) throw ContractError("layer_norm: eps must be positive");
    const bool vec = x.rank() == 1;
    const long d = x.rows();
    const long cols = vec ? 1 : x.cols();
    if (d == 0) throw DimensionError("layer_norm: empty input");
    if (gamma.rank() != 1 || gamma.rows() != d || beta.rank() != 1 || beta.rows() != d)
        throw DimensionError("layer_norm: gamma/beta must be rank-1 of size " + std::to_string(d));
    std::vector<double> out(x.data().size());
    std::vector<double> inv_std(static_cast<std::size_t>(cols));
    std::vector<double> xhat(x.data().size());
    for (long j = 0; j < cols; ++j) {
        double mean = 0.0;
        for (long i = 0; i < d; ++i) mean += x.data()[i * cols + j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (long i = 0; i < d; ++i) {
            const double c = x.data()[i * cols + j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(j)] = is;
        for (long i = 0; i < d; ++i) {
            const double h = (x.data()[i * cols + j] - mean) * is;
            xhat[i * cols + j] = h;
            out[i * cols + j] = gamma.data()[i] * h + beta.data()[i];
        }
    }
    bool tracked = track({&x, &gamma, &beta});
    auto node = make_node(x.shape(), std::move(out), "layer_norm");
    return finish(node, tracked, {&x, &gamma, &beta},
                  [xn = x.node(), gn = gamma.node(), bn = beta.node(), d, cols,
                   inv_std = std::move(inv_std), xhat = std::move(xhat)](TensorNode& self) {
                      for (long j = 0; j < cols; ++j) {
                          const double is = inv_std[static_cast<std::size_t>(j)];
                          // dxhat_i = dy_i * gamma_i
                          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                          for (long i = 0; i < d; ++i) {
                              const double dxh = self.grad[i * cols + j] * gn->data[i];
                              sum_dxhat += dxh;
                              sum_dxhat_xhat += dxh * xhat[i * cols + j];
                          }
                          if (xn->requires_grad) {
                              xn->ensure_grad();
                              for (long i = 0; i < d; ++i) {
                                  const double dxh = self.grad[i * cols + j] * gn->data[i];
                                  xn->grad[i * cols + j] +=
                                      is * (dxh - (sum_dxhat +
                                                   xhat[i * cols + j] * sum_dxhat_xhat) /
                                                      static_cast<double>(d));
                              }
                          }
                          if (gn->requires_grad) {
                              gn->ensure_grad();
                              for (long i = 0; i < d; ++i)
                                  gn->grad[i] += self.grad[i * cols + j] * xhat[i * cols + j];
                          }
                          if (bn->requires_grad) {
                              bn->ensure_grad();
                              for (long i = 0; i < d; ++i) bn->grad[i] += self.grad[i * cols + j];
                          }
                      }
                  });
}

Tensor cross_entropy_from_logits(const Tensor& logits, long target) {
    if (logits.rank() != 1)
        throw DimensionError("cross_entropy_from_logits: expected rank-1 logits, got " +
                             detail::shape_str(logits.shape()));
    const long n = logits.rows();
    if (target < 0 || target >= n)
        throw IndexError("cross_entropy_from_logits: target " + std::to_string(target) +
                         " out of range [0," + std::to_string(n) + ")");
    double mx = logits.data()[0];
    for (long i = 1; i < n; ++i) mx = std::max(mx, logits.data()[i]);
    double lse = 0.0;
    for (long i = 0; i < n; ++i) lse += std::exp(logits.data()[i] - mx);
    lse = std::log(lse) + mx;
    const double loss = lse - logits.data()[static_cast<std::size_t>(target)];
    bool tracked = track({&logits});
    auto node = make_node({1}, {loss}, "cross_entropy");
    return finish(node, tracked, {&logits}, [ln = logits.node(), target, n, mx, lse](TensorNode& self) {
        if (!ln->requires_grad) return;
        ln->ensure_grad();
        const double g = self.grad[0];
        // d/dlogits = softmax(logits) - onehot(target)
        for (long i = 0; i < n; ++i) {
            double p = std::exp(ln->data[static_cast<std::size_t>(i)] - lse);
            if (i == target) p -= 1.0;
            ln->grad[static_cast<std::size_t>(i)] += g * p;
        }
    });
}

Tensor max_pool_time(const Tensor& h) {
    check_rank2(h, "max_pool_time");
    const long d = h.rows(), L = h.cols();
    if (L == 0) throw DimensionError("max_pool_time: empty time axis");
    std::vector<double> out(static_cast<std::size_t>(d));
    std::vector<long> arg(static_cast<std::size_t>(d));
    for (long i = 0; i < d; ++i) {
        long best = 0;
        double bv = h.data()[i * L];
        double second = -std::numeric_limits<double>::infinity();
        for (long j = 1; j < L; ++j) {
            const double v = h.data()[i * L + j];
            if (v > bv) {  // strict: ties keep the first index
                second = bv;
                bv = v;
                best = j;
            } else {
                second = std::max(second, v);
            }
        }
        if (L > 1) g_pool_min_gap = std::min(g_pool_min_gap, bv - second);
        out[static_cast<std::size_t>(i)] = bv;
        arg[static_cast<std::size_t>(i)] = best;
    }
    bool tracked = track({&h});
    auto node = make_node({d}, std::move(out), "max_pool_time");
    return finish(node, tracked, {&h}, [hn = h.node(), d, L, arg = std::move(arg)](TensorNode& self) {
        if (!hn->requires_grad) return;
        hn->ensure_grad();
        for (long i = 0; i < d; ++i)
            hn->grad[i * L + arg[static_cast<std::size_t>(i)]] += self.grad[static_cast<std::size_t>(i)];
    });
}

Tensor concat_time(const Tensor& a, const Tensor& b) {
    check_rank2(a, "concat_time");
    check_rank2(b, "concat_time");
    const long d = a.rows();
    if (b.rows() != d)
        throw DimensionError("concat_time: row counts differ, " + detail::shape_str(a.shape()) +
                             " vs " + detail::shape_str(b.shape()));
    const long l1 = a.cols(), l2 = b.cols();
    std::vector<double> out(static_cast<std::size_t>(d * (l1 + l2)));
    for (long i = 0; i < d; ++i) {
        for (long j = 0; j < l1; ++j) out[i * (l1 + l2) + j] = a.data()[i * l1 + j];
        for (long j = 0; j < l2; ++j) out[i * (l1 + l2) + l1 + j] = b.data()[i * l2 + j];
    }
    bool tracked = track({&a, &b});
    auto node = make_node({d, l1 + l2}, std::move(out), "concat_time");
    return finish(node, tracked, {&a, &b}, [an = a.node(), bn = b.node(), d, l1, l2](TensorNode& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (long i = 0; i < d; ++i)
                for (long j = 0; j < l1; ++j) an->grad[i * l1 + j] += self.grad[i * (l1 + l2) + j];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (long i = 0; i < d; ++i)
                for (long j = 0; j < l2; ++j)
                    bn->grad[i * l2 + j] += self.grad[i * (l1 + l2) + l1 + j];
        }
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: no inputs");
    const long rank = parts.front().rank();
    const long c = rank == 2 ? parts.front().cols() : 0;
    long total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != rank || (rank == 2 && p.cols() != c))
            throw DimensionError("concat_rows: incompatible part shape " +
                                 detail::shape_str(p.shape()));
        total += p.rows();
    }
    std::vector<double> out;
    out.reserve(parts.front().data().size() * parts.size());
    for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    bool tracked = false;
    if (GradMode::enabled())
        for (const Tensor& p : parts)
            if (p.requires_grad()) tracked = true;
    std::vector<long> out_shape = rank == 2 ? std::vector<long>{total, c}
                                            : std::vector<long>{total};
    auto node = make_node(std::move(out_shape), std::move(out), "concat_rows");
    if (tracked) {
        node->requires_grad = true;
        std::vector<std::shared_ptr<TensorNode>> srcs;
        for (const Tensor& p : parts) {
            node->parents.push_back(p.node());
            srcs.push_back(p.node());
        }
        node->backward = [srcs = std::move(srcs)](TensorNode& self) {
            std::size_t off = 0;
            for (auto& src : srcs) {
                const std::size_t n = src->data.size();
                if (src->requires_grad) {
                    src->ensure_grad();
                    for (std::size_t i = 0; i < n; ++i) src->grad[i] += self.grad[off + i];
                }
                off += n;
            }
        };
    }
    return Tensor(node);
}

Tensor reshape(const Tensor& a, std::vector<long> shape) {
    long n = 1;
    for (long d : shape) n *= d;
    if (n != a.numel())
        throw DimensionError("reshape: cannot view " + detail::shape_str(a.shape()) + " as " +
                             detail::shape_str(shape));
    bool tracked = track({&a});
    auto node = make_node(std::move(shape), a.data(), "reshape");
    return finish(node, tracked, {&a}, [an = a.node()](TensorNode& self) {
        add_grad(*an, self.grad);
    });
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
    check_rank2(table, "embedding_lookup");
    const long v = table.rows(), d = table.cols();
    const long L = static_cast<long>(ids.size());
    for (int id : ids)
        if (id < 0 || id >= v)
            throw IndexError("embedding_lookup: id " + std::to_string(id) + " out of range [0," +
                             std::to_string(v) + ")");
    std::vector<double> out(static_cast<std::size_t>(d * L));
    for (long j = 0; j < L; ++j)
        for (long i = 0; i < d; ++i) out[i * L + j] = table.data()[ids[static_cast<std::size_t>(j)] * d + i];
    bool tracked = track({&table});
    auto node = make_node({d, L}, std::move(out), "embedding_lookup");
    return finish(node, tracked, {&table}, [tn = table.node(), ids, d, L](TensorNode& self) {
        if (!tn->requires_grad) return;
        tn->ensure_grad();
        for (long j = 0; j < L; ++j) {
            double* row = tn->grad.data() + ids[static_cast<std::size_t>(j)] * d;
            for (long i = 0; i < d; ++i) row[i] += self.grad[i * L + j];
        }
    });
}

Tensor slice_rows(const Tensor& a, long r0, long r1) {
    check_rank2(a, "slice_rows");
    if (r0 < 0 || r1 > a.rows() || r0 >= r1)
        throw IndexError("slice_rows: range [" + std::to_string(r0) + "," + std::to_string(r1) +
                         ") invalid for " + detail::shape_str(a.shape()));
    const long c = a.cols(), n = r1 - r0;
    std::vector<double> out(a.data().begin() + r0 * c, a.data().begin() + r1 * c);
    bool tracked = track({&a});
    auto node = make_node({n, c}, std::move(out), "slice_rows");
    return finish(node, tracked, {&a}, [an = a.node(), r0, n, c](TensorNode& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (long i = 0; i < n * c; ++i) an->grad[r0 * c + i] += self.grad[static_cast<std::size_t>(i)];
    });
}

Tensor select_column(const Tensor& a, long j) {
    check_rank2(a, "select_column");
    const long d = a.rows(), L = a.cols();
    if (j < 0 || j >= L)
        throw IndexError("select_column: column " + std::to_string(j) + " out of range [0," +
                         std::to_string(L) + ")");
    std::vector<double> out(static_cast<std::size_t>(d));
    for (long i = 0; i < d; ++i) out[static_cast<std::size_t>(i)] = a.data()[i * L + j];
    bool tracked = track({&a});
    auto node = make_node({d}, std::move(out), "select_column");
    return finish(node, tracked, {&a}, [an = a.node(), j, d, L](TensorNode& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (long i = 0; i < d; ++i) an->grad[i * L + j] += self.grad[static_cast<std::size_t>(i)];
    });
}

Tensor sum(const Tensor& a) {
    double total = 0.0;
    for (double v : a.data()) total += v;
    bool tracked = track({&a});
    auto node = make_node({1}, {total}, "sum");
    return finish(node, tracked, {&a}, [an = a.node()](TensorNode& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (double& g : an->grad) g += self.grad[0];
    });
}

}  // namespace genmc

#include "ddgcn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "ddgcn/kernels.hpp"

namespace ddgcn {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << " x ";
    os << s[i];
  }
  os << "]";
  return os.str();
}

namespace {

void check_shape(const Shape& s) {
  if (s.empty()) throw std::invalid_argument("tensor shape must have at least one extent");
  for (std::size_t d : s) {
    if (d == 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_str(s));
  }
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch: " + shape_str(a) + " vs " +
                              shape_str(b));
}

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> values,
                                        bool requires_grad) {
  check_shape(shape);
  if (values.size() != shape_numel(shape)) {
    throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                " values for shape " + shape_str(shape));
  }
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->requires_grad = requires_grad;
  return n;
}

}  // namespace

namespace detail {

Tensor make_op(Shape shape, std::vector<Tensor> parents, BackwardFn backward,
               ForwardFn forward) {
  check_shape(shape);
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values.resize(shape_numel(n->shape));
  n->parents.reserve(parents.size());
  bool rg = false;
  for (const Tensor& p : parents) {
    if (!p.defined()) throw std::invalid_argument("op parent is an undefined tensor");
    rg = rg || p.requires_grad();
    n->parents.push_back(std::shared_ptr<Node>(p.node_));
  }
  forward(*n);
  n->recompute = std::move(forward);
  n->requires_grad = rg;
  if (rg) n->backward = std::move(backward);
  return Tensor(std::move(n));
}

void reevaluate(const Tensor& root) {
  if (!root.defined()) throw std::invalid_argument("reevaluate: undefined tensor");
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    std::size_t next;
  };
  std::vector<Frame> stack{{root.node(), 0}};
  visited.insert(root.node());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      Node* p = f.node->parents[f.next++].get();
      if (!visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  for (Node* node : order) {
    if (node->recompute) node->recompute(*node);
  }
}

}  // namespace detail

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values), true));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), 0.0);
  return Tensor(make_leaf(std::move(shape), std::move(v), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), value);
  return Tensor(make_leaf(std::move(shape), std::move(v), requires_grad));
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, std::mt19937_64& rng,
                       bool requires_grad) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = dist(rng);
  return Tensor(make_leaf(std::move(shape), std::move(v), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(make_leaf({1}, {value}, requires_grad));
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::rank() const { return node_->shape.size(); }
std::size_t Tensor::numel() const { return node_->values.size(); }

std::size_t Tensor::rows() const {
  if (rank() != 2) throw std::invalid_argument("rows(): tensor is not rank-2: " + shape_str(shape()));
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw std::invalid_argument("cols(): tensor is not rank-2: " + shape_str(shape()));
  return node_->shape[1];
}

std::span<const double> Tensor::values() const { return node_->values; }
std::span<double> Tensor::values_mut() { return node_->values; }

double Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("item(): tensor has " + std::to_string(numel()) + " elements");
  }
  return node_->values[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  if (rank() != 2) throw std::invalid_argument("at(): tensor is not rank-2: " + shape_str(shape()));
  return node_->values[i * node_->shape[1] + j];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::is_stop_gradient() const { return node_->stop_gradient; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (node_->grad.empty()) throw std::runtime_error("grad(): no gradient accumulated");
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

// ---------------------------------------------------------------------------
// ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    shape_mismatch("matmul", a.shape(), b.shape());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  return detail::make_op(
      {m, n}, {a, b},
      [m, k, n](const detail::Node& self, const std::vector<double>& g,
                const std::vector<std::vector<double>*>& pa) {
        const auto& av = self.parents[0]->values;
        const auto& bv = self.parents[1]->values;
        if (pa[0]) kern::matmul_nt(g.data(), bv.data(), pa[0]->data(), m, n, k, true);
        if (pa[1]) kern::matmul_tn(av.data(), g.data(), pa[1]->data(), k, m, n, true);
      },
      [m, k, n](detail::Node& self) {
        kern::matmul_nn(self.parents[0]->values.data(), self.parents[1]->values.data(),
                        self.values.data(), m, k, n);
      });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw std::invalid_argument("transpose: tensor is not rank-2: " + shape_str(a.shape()));
  const std::size_t m = a.rows(), n = a.cols();
  return detail::make_op(
      {n, m}, {a},
      [m, n](const detail::Node&, const std::vector<double>& g,
             const std::vector<std::vector<double>*>& pa) {
        if (!pa[0]) return;
        auto& da = *pa[0];
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t i = 0; i < m; ++i) da[i * n + j] += g[j * m + i];
      },
      [m, n](detail::Node& self) {
        const auto& av = self.parents[0]->values;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) self.values[j * m + i] = av[i * n + j];
      });
}

Tensor reshape(const Tensor& a, Shape shape) {
  check_shape(shape);
  if (shape_numel(shape) != a.numel()) shape_mismatch("reshape", a.shape(), shape);
  return detail::make_op(
      std::move(shape), {a},
      [](const detail::Node&, const std::vector<double>& g,
         const std::vector<std::vector<double>*>& pa) {
        if (pa[0]) kern::axpy(1.0, g.data(), pa[0]->data(), g.size());
      },
      [](detail::Node& self) {
        const auto& av = self.parents[0]->values;
        std::copy(av.begin(), av.end(), self.values.begin());
      });
}

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_mismatch(op, a.shape(), b.shape());
}

using MapKernel = void (*)(const double*, const double*, double*, std::size_t);

detail::ForwardFn binary_forward(MapKernel kernel) {
  return [kernel](detail::Node& self) {
    kernel(self.parents[0]->values.data(), self.parents[1]->values.data(), self.values.data(),
           self.values.size());
  };
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  return detail::make_op(a.shape(), {a, b},
                         [](const detail::Node&, const std::vector<double>& g,
                            const std::vector<std::vector<double>*>& pa) {
                           if (pa[0]) kern::axpy(1.0, g.data(), pa[0]->data(), g.size());
                           if (pa[1]) kern::axpy(1.0, g.data(), pa[1]->data(), g.size());
                         },
                         binary_forward(&kern::add));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  return detail::make_op(a.shape(), {a, b},
                         [](const detail::Node&, const std::vector<double>& g,
                            const std::vector<std::vector<double>*>& pa) {
                           if (pa[0]) kern::axpy(1.0, g.data(), pa[0]->data(), g.size());
                           if (pa[1]) kern::axpy(-1.0, g.data(), pa[1]->data(), g.size());
                         },
                         binary_forward(&kern::sub));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  return detail::make_op(
      a.shape(), {a, b},
      [](const detail::Node& self, const std::vector<double>& g,
         const std::vector<std::vector<double>*>& pa) {
        const auto& av = self.parents[0]->values;
        const auto& bv = self.parents[1]->values;
        if (pa[0]) {
          auto& da = *pa[0];
          for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv[i];
        }
        if (pa[1]) {
          auto& db = *pa[1];
          for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * av[i];
        }
      },
      binary_forward(&kern::mul));
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape("div", a, b);
  for (double x : b.values()) {
    if (x == 0.0) throw std::domain_error("div: denominator contains zero");
  }
  return detail::make_op(
      a.shape(), {a, b},
      [](const detail::Node& self, const std::vector<double>& g,
         const std::vector<std::vector<double>*>& pa) {
        const auto& av = self.parents[0]->values;
        const auto& bv = self.parents[1]->values;
        if (pa[0]) {
          auto& da = *pa[0];
          for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] / bv[i];
        }
        if (pa[1]) {
          auto& db = *pa[1];
          for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i] * av[i] / (bv[i] * bv[i]);
        }
      },
      binary_forward(&kern::div));
}

Tensor add_scalar(const Tensor& a, double s) {
  return detail::make_op(a.shape(), {a},
                         [](const detail::Node&, const std::vector<double>& g,
                            const std::vector<std::vector<double>*>& pa) {
                           if (pa[0]) kern::axpy(1.0, g.data(), pa[0]->data(), g.size());
                         },
                         [s](detail::Node& self) {
                           kern::add_scalar(self.parents[0]->values.data(), s,
                                            self.values.data(), self.values.size());
                         });
}

Tensor scale(const Tensor& a, double s) {
  return detail::make_op(a.shape(), {a},
                         [s](const detail::Node&, const std::vector<double>& g,
                             const std::vector<std::vector<double>*>& pa) {
                           if (pa[0]) kern::axpy(s, g.data(), pa[0]->data(), g.size());
                         },
                         [s](detail::Node& self) {
                           kern::scale(self.parents[0]->values.data(), s, self.values.data(),
                                       self.values.size());
                         });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor sigmoid(const Tensor& a) {
  return detail::make_op(
      a.shape(), {a},
      [](const detail::Node& self, const std::vector<double>& g,
         const std::vector<std::vector<double>*>& pa) {
        if (!pa[0]) return;
        auto& da = *pa[0];
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = self.values[i];
          da[i] += g[i] * y * (1.0 - y);
        }
      },
      [](detail::Node& self) {
        kern::sigmoid(self.parents[0]->values.data(), self.values.data(), self.values.size());
      });
}

Tensor relu(const Tensor& a) {
  return detail::make_op(
      a.shape(), {a},
      [](const detail::Node& self, const std::vector<double>& g,
         const std::vector<std::vector<double>*>& pa) {
        if (!pa[0]) return;
        const auto& xv = self.parents[0]->values;
        auto& da = *pa[0];
        // relu'(0) taken as 0.
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (xv[i] > 0.0) da[i] += g[i];
        }
      },
      [](detail::Node& self) {
        kern::relu(self.parents[0]->values.data(), self.values.data(), self.values.size());
      });
}

Tensor rsqrt(const Tensor& a) {
  for (double x : a.values()) {
    if (x <= 0.0) throw std::domain_error("rsqrt: input must be positive");
  }
  return detail::make_op(
      a.shape(), {a},
      [](const detail::Node& self, const std::vector<double>& g,
         const std::vector<std::vector<double>*>& pa) {
        if (!pa[0]) return;
        auto& da = *pa[0];
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = self.values[i];
          da[i] += g[i] * (-0.5 * y * y * y);
        }
      },
      [](detail::Node& self) {
        kern::rsqrt(self.parents[0]->values.data(), self.values.data(), self.values.size());
      });
}

Tensor reduce_sum(const Tensor& a) {
  return detail::make_op({1}, {a},
                         [](const detail::Node&, const std::vector<double>& g,
                            const std::vector<std::vector<double>*>& pa) {
                           if (!pa[0]) return;
                           auto& da = *pa[0];
                           for (double& x : da) x += g[0];
                         },
                         [](detail::Node& self) {
                           self.values[0] = kern::sum(self.parents[0]->values.data(),
                                                      self.parents[0]->values.size());
                         });
}

namespace {

// Shared forward/backward for axis reductions over rank-1 and rank-2 tensors.
Tensor reduce_axis(const Tensor& a, std::size_t axis, bool mean) {
  if (axis >= a.rank()) {
    throw std::invalid_argument("reduce: axis " + std::to_string(axis) +
                                " out of range for " + shape_str(a.shape()));
  }
  if (a.rank() == 1) {
    const double denom = mean ? static_cast<double>(a.numel()) : 1.0;
    return detail::make_op({1}, {a},
                           [denom](const detail::Node&, const std::vector<double>& g,
                                   const std::vector<std::vector<double>*>& pa) {
                             if (!pa[0]) return;
                             auto& da = *pa[0];
                             for (double& x : da) x += g[0] / denom;
                           },
                           [denom](detail::Node& self) {
                             const auto& av = self.parents[0]->values;
                             self.values[0] = kern::sum(av.data(), av.size()) / denom;
                           });
  }
  if (a.rank() != 2) {
    throw std::invalid_argument("reduce: axis reduction needs rank 1 or 2, got " +
                                shape_str(a.shape()));
  }
  const std::size_t r = a.rows(), c = a.cols();
  if (axis == 0) {
    const double denom = mean ? static_cast<double>(r) : 1.0;
    return detail::make_op(
        {c}, {a},
        [r, c, denom](const detail::Node&, const std::vector<double>& g,
                      const std::vector<std::vector<double>*>& pa) {
          if (!pa[0]) return;
          auto& da = *pa[0];
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) da[i * c + j] += g[j] / denom;
        },
        [r, c, denom](detail::Node& self) {
          const auto& av = self.parents[0]->values;
          std::fill(self.values.begin(), self.values.end(), 0.0);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) self.values[j] += av[i * c + j];
          for (double& x : self.values) x /= denom;
        });
  }
  const double denom = mean ? static_cast<double>(c) : 1.0;
  return detail::make_op(
      {r}, {a},
      [r, c, denom](const detail::Node&, const std::vector<double>& g,
                    const std::vector<std::vector<double>*>& pa) {
        if (!pa[0]) return;
        auto& da = *pa[0];
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) da[i * c + j] += g[i] / denom;
      },
      [r, c, denom](detail::Node& self) {
        const auto& av = self.parents[0]->values;
        for (std::size_t i = 0; i < r; ++i) {
          self.values[i] = kern::sum(av.data() + i * c, c) / denom;
        }
      });
}

}  // namespace

Tensor reduce_sum(const Tensor& a, std::size_t axis) { return reduce_axis(a, axis, false); }

Tensor reduce_mean(const Tensor& a) {
  const double n = static_cast<double>(a.numel());
  return detail::make_op({1}, {a},
                         [n](const detail::Node&, const std::vector<double>& g,
                             const std::vector<std::vector<double>*>& pa) {
                           if (!pa[0]) return;
                           auto& da = *pa[0];
                           for (double& x : da) x += g[0] / n;
                         },
                         [n](detail::Node& self) {
                           const auto& av = self.parents[0]->values;
                           self.values[0] = kern::sum(av.data(), av.size()) / n;
                         });
}

Tensor reduce_mean(const Tensor& a, std::size_t axis) { return reduce_axis(a, axis, true); }

Tensor stop_gradient(const Tensor& a) {
  if (!a.defined()) throw std::invalid_argument("stop_gradient: undefined tensor");
  Tensor t = detail::make_op(a.shape(), {a}, nullptr, [](detail::Node& self) {
    const auto& av = self.parents[0]->values;
    std::copy(av.begin(), av.end(), self.values.begin());
  });
  // Clearing recompute freezes the copied values: during re-evaluation at
  // perturbed inputs a detached branch stays a constant, matching the
  // gradient backward defines for it.
  detail::Node* n = t.node();
  n->recompute = nullptr;
  n->backward = nullptr;
  n->requires_grad = false;
  n->stop_gradient = true;
  return t;
}

Tensor dropout(const Tensor& a, double rate, bool training, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return a;
  const double keep = 1.0 - rate;
  std::bernoulli_distribution coin(keep);
  auto mask = std::make_shared<std::vector<double>>(a.numel());
  for (double& m : *mask) m = coin(rng) ? 1.0 / keep : 0.0;
  return detail::make_op(
      a.shape(), {a},
      [mask](const detail::Node&, const std::vector<double>& g,
             const std::vector<std::vector<double>*>& pa) {
        if (!pa[0]) return;
        auto& da = *pa[0];
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * (*mask)[i];
      },
      [mask](detail::Node& self) {
        const auto& av = self.parents[0]->values;
        for (std::size_t i = 0; i < self.values.size(); ++i) {
          self.values[i] = av[i] * (*mask)[i];
        }
      });
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2 || logits.cols() != 2) {
    throw std::invalid_argument("softmax_cross_entropy: logits must be n x 2, got " +
                                shape_str(logits.shape()));
  }
  const std::size_t n = logits.rows();
  if (labels.size() != n) {
    throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(n) + " rows");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) {
      throw std::invalid_argument("softmax_cross_entropy: label out of range: " +
                                  std::to_string(y));
    }
  }
  auto probs = std::make_shared<std::vector<double>>(2 * n);
  auto lab = std::make_shared<std::vector<int>>(labels);
  return detail::make_op(
      {1}, {logits},
      [probs, lab, n](const detail::Node&, const std::vector<double>& g,
                      const std::vector<std::vector<double>*>& pa) {
        if (!pa[0]) return;
        auto& da = *pa[0];
        const double s = g[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          const int y = (*lab)[i];
          da[2 * i] += s * ((*probs)[2 * i] - (y == 0 ? 1.0 : 0.0));
          da[2 * i + 1] += s * ((*probs)[2 * i + 1] - (y == 1 ? 1.0 : 0.0));
        }
      },
      [probs, lab, n](detail::Node& self) {
        const auto& lv = self.parents[0]->values;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double l0 = lv[2 * i], l1 = lv[2 * i + 1];
          const double m = std::max(l0, l1);
          const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
          const double z = e0 + e1;
          (*probs)[2 * i] = e0 / z;
          (*probs)[2 * i + 1] = e1 / z;
          total += m + std::log(z) - ((*lab)[i] == 0 ? l0 : l1);
        }
        self.values[0] = total / static_cast<double>(n);
      });
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined tensor");
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss.shape()));
  }
  detail::Node* root = loss.node();

  // Post-order DFS; expands only parents that take gradient, so stop_gradient
  // nodes (requires_grad false) act as barriers.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  struct Frame {
    detail::Node* node;
    std::size_t next;
  };
  std::vector<Frame> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      detail::Node* p = f.node->parents[f.next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  // Pass-local adjoints keep repeated backward calls additive in .grad.
  std::unordered_map<detail::Node*, std::vector<double>> adjoint;
  adjoint.reserve(order.size());
  adjoint[root] = {1.0};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    auto found = adjoint.find(node);
    if (found == adjoint.end()) continue;
    if (!node->backward) continue;
    std::vector<std::vector<double>*> parent_adj(node->parents.size(), nullptr);
    for (std::size_t i = 0; i < node->parents.size(); ++i) {
      detail::Node* p = node->parents[i].get();
      if (!p->requires_grad) continue;
      auto& buf = adjoint[p];
      if (buf.empty()) buf.assign(p->values.size(), 0.0);
      parent_adj[i] = &buf;
    }
    node->backward(*node, found->second, parent_adj);
  }

  for (auto& [node, adj] : adjoint) {
    if (!node->requires_grad) continue;
    if (node->grad.empty()) node->grad.assign(node->values.size(), 0.0);
    kern::axpy(1.0, adj.data(), node->grad.data(), adj.size());
  }
}

}  // namespace ddgcn

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

// Minimal reverse-mode autodiff over dense row-major double arrays. Nodes form
// a DAG through parent links; backward() walks it in reverse topological order
// and accumulates adjoints into persistent .grad buffers. A computation graph
// belongs to one thread from construction through backward; distinct graphs
// over shared read-only leaves may run concurrently.

namespace ddgcn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tensor;

namespace detail {

struct Node;

// Adds this node's contribution to the parent adjoint buffers. A null entry
// means the corresponding parent does not take gradient.
using BackwardFn = std::function<void(const Node& self, const std::vector<double>& adjoint,
                                      const std::vector<std::vector<double>*>& parent_adjoints)>;

// Refreshes self.values from the parents' current values. Nodes without one
// (leaves and stop-gradient nodes) keep their stored values during
// re-evaluation, which is what makes finite differencing consistent with the
// gradients backward defines: a detached branch is a constant in both.
using ForwardFn = std::function<void(Node& self)>;

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // lazily allocated; persists until zero_grad
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
  ForwardFn recompute;
  bool requires_grad = false;
  bool stop_gradient = false;
};

// Builds an op node whose values are produced (now and on re-evaluation) by
// forward. requires_grad is derived from the parents. Exposed so tests can
// introduce ops with custom rules.
Tensor make_op(Shape shape, std::vector<Tensor> parents, BackwardFn backward,
               ForwardFn forward);

// Recomputes every op node under root in dependency order from the current
// leaf values, in place.
void reevaluate(const Tensor& root);

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor uniform(Shape shape, double lo, double hi, std::mt19937_64& rng,
                        bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const;
  std::size_t numel() const;
  std::size_t rows() const;  // rank-2 only
  std::size_t cols() const;

  std::span<const double> values() const;
  // Leaf mutation for the optimizer and finite differencing. Mutating an
  // interior node invalidates values already consumed downstream.
  std::span<double> values_mut();
  double item() const;  // numel() == 1
  double at(std::size_t i, std::size_t j) const;

  bool requires_grad() const;
  bool is_stop_gradient() const;
  bool has_grad() const;
  std::span<const double> grad() const;  // throws if no grad accumulated yet
  void zero_grad();

  detail::Node* node() const { return node_.get(); }

 private:
  friend Tensor detail::make_op(Shape, std::vector<Tensor>, detail::BackwardFn,
                                detail::ForwardFn);
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor scale(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor rsqrt(const Tensor& a);

Tensor reduce_sum(const Tensor& a);
Tensor reduce_sum(const Tensor& a, std::size_t axis);
Tensor reduce_mean(const Tensor& a);
Tensor reduce_mean(const Tensor& a, std::size_t axis);

Tensor stop_gradient(const Tensor& a);

// Inverted-scaling dropout: kept entries are divided by the keep probability.
// Identity when training is false or rate is zero.
Tensor dropout(const Tensor& a, double rate, bool training, std::mt19937_64& rng);

// Mean negative log-likelihood over rows of an n x 2 logit matrix,
// log-sum-exp stabilized. Labels must be 0 or 1.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Reverse pass from a scalar loss. Accumulates into .grad of every
// requires_grad ancestor; calling twice without zero_grad doubles the grads.
void backward(const Tensor& loss);

}  // namespace ddgcn

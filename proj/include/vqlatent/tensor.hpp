#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vql::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// One recorded value in the dynamic graph. Interior nodes own references to
/// their parents, so a loss tensor keeps its whole tape alive.
template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a backward pass reaches this node
  bool requires_grad = false;
  bool stop_gradient = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
};

/// Dense row-major array with an optional gradient slot.
///
/// Copies are shallow: two Tensor handles may refer to the same node. Values
/// are immutable after construction except through `data_mut()`, which is
/// reserved for leaves (parameters updated by an optimizer).
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const T> data() const;
  std::span<T> data_mut();
  T item() const;
  T at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool stop_gradient() const;

  bool has_grad() const;
  std::span<const T> grad() const;
  std::span<T> grad_mut();
  void zero_grad();

  /// Reverse-mode pass from this scalar. Leaf gradients accumulate across
  /// calls; interior gradients are recomputed each time.
  void backward() const;

  /// Value copy without graph history.
  Tensor detach() const;

  const std::shared_ptr<Node<T>>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<Node<T>> node);

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Graph recording switch for the current thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
void backward(const Tensor<T>& loss) {
  loss.backward();
}

template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& x) {
  std::vector<To> out(x.data().begin(), x.data().end());
  return Tensor<To>(x.shape(), std::move(out), x.requires_grad());
}

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace vql::ad

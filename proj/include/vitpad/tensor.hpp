// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensors with an optional reverse-mode tape.
//
// A Tensor is a shared handle: copying a Tensor aliases the same storage, the
// same way a framework "variable" does. Use clone() for an independent copy.
// Ops record onto the tape that is active on the calling thread (see
// TapeScope) whenever at least one input is tracked.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vitpad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

template <typename S>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::f32; }
template <>
constexpr DType dtype_of<double>() { return DType::f64; }

template <typename S>
struct TensorStorage {
  Shape shape;
  std::vector<S> data;
  std::vector<S> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool on_tape = false;  // produced by a recorded op

  std::vector<S>& grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), S(0));
    return grad;
  }
};

template <typename S>
class Tensor {
 public:
  using Scalar = S;
  using Storage = TensorStorage<S>;

  Tensor() : impl_(std::make_shared<Storage>()) { impl_->data.assign(1, S(0)); }
  explicit Tensor(Shape shape, S fill = S(0));
  Tensor(Shape shape, std::vector<S> data);

  static Tensor scalar(S v) { return Tensor(Shape{}, std::vector<S>{v}); }

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return impl_->data.size(); }
  static constexpr DType dtype() { return dtype_of<S>(); }

  std::span<S> data() { return impl_->data; }
  std::span<const S> data() const { return impl_->data; }
  S item() const;
  S& operator[](std::size_t i) { return impl_->data[i]; }
  S operator[](std::size_t i) const { return impl_->data[i]; }
  S& at(std::initializer_list<std::size_t> index);
  S at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    impl_->requires_grad = on;
    return *this;
  }
  // True when gradients flow through this tensor (leaf parameter or tape output).
  bool tracked() const { return impl_->requires_grad || impl_->on_tape; }
  bool has_grad_node() const { return impl_->on_tape; }

  // Gradient view; zeros when nothing has been accumulated yet.
  std::span<const S> grad() const;
  Tensor grad_tensor() const;
  void zero_grad() { impl_->grad.clear(); }

  Tensor clone() const;
  Tensor detach() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  const std::shared_ptr<Storage>& storage() const { return impl_; }
  explicit Tensor(std::shared_ptr<Storage> impl) : impl_(std::move(impl)) {}

 private:
  std::size_t flat_index(std::initializer_list<std::size_t> index) const;
  std::shared_ptr<Storage> impl_;
};

// Ordered record of primitive applications. Inputs of every node precede it
// because nodes are appended as ops execute.
template <typename S>
class Tape {
 public:
  using StoragePtr = std::shared_ptr<TensorStorage<S>>;

  struct Node {
    std::vector<StoragePtr> inputs;
    StoragePtr output;
    std::function<void()> backward;
  };

  void record(std::vector<StoragePtr> inputs, StoragePtr output, std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and runs every rule in reverse order. Gradients
  // of intermediates are reset first; leaf gradients accumulate across calls.
  void backward(const Tensor<S>& loss);

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  static Tape* active();

 private:
  template <typename>
  friend class TapeScope;
  std::vector<Node> nodes_;
};

// Makes `tape` the active tape of this thread for the scope's lifetime.
template <typename S>
class TapeScope {
 public:
  explicit TapeScope(Tape<S>& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<S>* previous_;
};

// Convenience: backward on the active tape.
template <typename S>
void backward(const Tensor<S>& loss);

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& t) {
  std::vector<To> out(t.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<To>(t[i]);
  return Tensor<To>(t.shape(), std::move(out));
}

}  // namespace vitpad

// SPDX-License-Identifier: Apache-2.0

#include "vitpad/tensor.hpp"

#include <sstream>

namespace vitpad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename S>
Tensor<S>::Tensor(Shape shape, S fill) : impl_(std::make_shared<Storage>()) {
  for (auto d : shape)
    if (d == 0) throw ShapeError("zero extent in shape " + shape_str(shape));
  impl_->data.assign(vitpad::numel(shape), fill);
  impl_->shape = std::move(shape);
}

template <typename S>
Tensor<S>::Tensor(Shape shape, std::vector<S> data) : impl_(std::make_shared<Storage>()) {
  for (auto d : shape)
    if (d == 0) throw ShapeError("zero extent in shape " + shape_str(shape));
  if (vitpad::numel(shape) != data.size())
    throw ShapeError("shape " + shape_str(shape) + " does not hold " + std::to_string(data.size()) +
                     " elements");
  impl_->data = std::move(data);
  impl_->shape = std::move(shape);
}

template <typename S>
std::size_t Tensor<S>::dim(std::size_t axis) const {
  if (axis >= rank())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  return impl_->shape[axis];
}

template <typename S>
S Tensor<S>::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

template <typename S>
std::size_t Tensor<S>::flat_index(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) throw ShapeError("index rank mismatch for " + shape_str(shape()));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= impl_->shape[axis]) throw ShapeError("index out of range for " + shape_str(shape()));
    flat = flat * impl_->shape[axis] + i;
    ++axis;
  }
  return flat;
}

template <typename S>
S& Tensor<S>::at(std::initializer_list<std::size_t> index) {
  return impl_->data[flat_index(index)];
}

template <typename S>
S Tensor<S>::at(std::initializer_list<std::size_t> index) const {
  return impl_->data[flat_index(index)];
}

template <typename S>
std::span<const S> Tensor<S>::grad() const {
  return impl_->grad_buffer();
}

template <typename S>
Tensor<S> Tensor<S>::grad_tensor() const {
  auto& g = impl_->grad_buffer();
  return Tensor<S>(shape(), std::vector<S>(g.begin(), g.end()));
}

template <typename S>
Tensor<S> Tensor<S>::clone() const {
  Tensor<S> out(shape(), std::vector<S>(impl_->data.begin(), impl_->data.end()));
  out.impl_->requires_grad = impl_->requires_grad;
  return out;
}

template <typename S>
Tensor<S> Tensor<S>::detach() const {
  return Tensor<S>(shape(), std::vector<S>(impl_->data.begin(), impl_->data.end()));
}

namespace {
template <typename S>
Tape<S>*& active_slot() {
  thread_local Tape<S>* tape = nullptr;
  return tape;
}
}  // namespace

template <typename S>
Tape<S>* Tape<S>::active() {
  return active_slot<S>();
}

template <typename S>
void Tape<S>::record(std::vector<StoragePtr> inputs, StoragePtr output,
                     std::function<void()> backward) {
  output->on_tape = true;
  nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(backward)});
}

template <typename S>
void Tape<S>::backward(const Tensor<S>& loss) {
  if (loss.numel() != 1)
    throw ShapeError("backward() needs a scalar loss, got " + shape_str(loss.shape()));
  if (!loss.tracked()) throw std::logic_error("backward() on a loss that is not on the tape");
  for (auto& node : nodes_) node.output->grad.clear();
  loss.storage()->grad_buffer()[0] += S(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // unreachable from the loss
    it->backward();
  }
}

template <typename S>
TapeScope<S>::TapeScope(Tape<S>& tape) : previous_(active_slot<S>()) {
  active_slot<S>() = &tape;
}

template <typename S>
TapeScope<S>::~TapeScope() {
  active_slot<S>() = previous_;
}

template <typename S>
void backward(const Tensor<S>& loss) {
  auto* tape = Tape<S>::active();
  if (tape == nullptr) throw std::logic_error("backward() without an active tape");
  tape->backward(loss);
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template class TapeScope<float>;
template class TapeScope<double>;
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);

}  // namespace vitpad

#include "fat/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace fat {

std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ')';
    return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad)
    : node_(std::make_shared<TensorNode<T>>()) {
    for (auto d : shape) {
        if (d < 0) throw ShapeError("negative dimension in " + shape_str(shape));
    }
    if (fat::numel(shape) != static_cast<std::int64_t>(data.size())) {
        throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                         shape_str(shape));
    }
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
    auto n = fat::numel(shape);
    return Tensor(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), T(0)), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
    auto n = fat::numel(shape);
    return Tensor(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
    return Tensor(Shape{}, std::vector<T>{value}, requires_grad);
}

template <typename T>
std::int64_t Tensor<T>::dim(int axis) const {
    const int r = static_cast<int>(rank());
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw ShapeError("axis out of range for " + shape_str(shape()));
    return node_->shape[static_cast<std::size_t>(axis)];
}

template <typename T>
T Tensor<T>::item() const {
    if (node_->data.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
}

template <typename T>
T Tensor<T>::at(std::initializer_list<std::int64_t> index) const {
    if (index.size() != rank()) throw ShapeError("index rank mismatch");
    std::int64_t off = 0;
    std::size_t a = 0;
    for (auto i : index) {
        const auto d = node_->shape[a++];
        if (i < 0 || i >= d) throw ShapeError("index out of range");
        off = off * d + i;
    }
    return node_->data[static_cast<std::size_t>(off)];
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
    return Tensor(node_->shape, node_->data, false);
}

namespace {
template <typename T>
thread_local Tape<T>* g_active_tape = nullptr;
}

template <typename T>
Tape<T>* active_tape() {
    return g_active_tape<T>;
}

template <typename T>
TapeScope<T>::TapeScope(Tape<T>* tape) : previous_(g_active_tape<T>) {
    g_active_tape<T> = tape;
}

template <typename T>
TapeScope<T>::~TapeScope() {
    g_active_tape<T> = previous_;
}

template <typename T>
void Tape<T>::record(std::function<void()> backward_fn) {
    entries_.push_back(std::move(backward_fn));
    consumed_ = false;
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
    if (consumed_) throw std::logic_error("backward called twice without a new forward pass");
    if (!loss.defined() || loss.numel() != 1) throw ShapeError("backward requires a scalar loss");
    if (!loss.requires_grad()) throw std::logic_error("loss is not connected to the tape");
    auto& node = *loss.node();
    node.ensure_grad();
    node.grad[0] += T(1);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
    entries_.clear();
    consumed_ = true;
}

template <typename T>
void Tape<T>::clear() {
    entries_.clear();
    consumed_ = false;
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template class TapeScope<float>;
template class TapeScope<double>;
template Tape<float>* active_tape<float>();
template Tape<double>* active_tape<double>();

}  // namespace fat

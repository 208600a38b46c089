#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fat/error.hpp"

namespace fat {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

enum class Precision { kSingle, kDouble };

template <typename T>
constexpr Precision precision_of() {
    return sizeof(T) == sizeof(float) ? Precision::kSingle : Precision::kDouble;
}

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until a gradient reaches this node
    bool requires_grad = false;

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), T(0));
    }
};

/// Dense row-major array with optional participation in the gradient tape.
///
/// A Tensor is a shared handle: copies alias the same storage. Operations
/// in ops.hpp always produce fresh nodes, so aliasing only matters for
/// leaves that are mutated in place (parameters updated by the optimizer).
template <typename T>
class Tensor {
   public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, T value, bool requires_grad = false);
    static Tensor scalar(T value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    /// Negative axes count from the back.
    std::int64_t dim(int axis) const;
    std::int64_t numel() const { return static_cast<std::int64_t>(node_->data.size()); }

    std::span<const T> data() const { return node_->data; }
    std::span<T> mutable_data() { return node_->data; }
    std::span<const T> grad() const { return node_->grad; }
    std::span<T> mutable_grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    bool has_grad() const { return !node_->grad.empty(); }
    void zero_grad() { node_->grad.clear(); }

    bool requires_grad() const { return node_ && node_->requires_grad; }
    void set_requires_grad(bool value) { node_->requires_grad = value; }

    T item() const;
    T at(std::initializer_list<std::int64_t> index) const;

    /// Copy of the data cut off from the tape.
    Tensor detach() const;

    const std::shared_ptr<TensorNode<T>>& node() const { return node_; }

   private:
    std::shared_ptr<TensorNode<T>> node_;
};

/// Ordered record of executed operations. Each entry is the backward
/// closure of one op; backward runs them in exact reverse order.
template <typename T>
class Tape {
   public:
    void record(std::function<void()> backward_fn);
    /// Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse.
    /// The tape is consumed; a second call without a new forward throws.
    void backward(const Tensor<T>& loss);
    void clear();
    std::size_t size() const { return entries_.size(); }

   private:
    std::vector<std::function<void()>> entries_;
    bool consumed_ = false;
};

template <typename T>
Tape<T>* active_tape();

/// Makes `tape` the recording target for ops on this thread while in scope.
template <typename T>
class TapeScope {
   public:
    explicit TapeScope(Tape<T>& tape) : TapeScope(&tape) {}
    /// nullptr suspends recording (e.g. for finite-difference evaluations).
    explicit TapeScope(Tape<T>* tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

   private:
    Tape<T>* previous_;
};

}  // namespace fat

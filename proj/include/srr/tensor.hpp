#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace srr {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node;
using BackwardFn = std::function<void(Node& out)>;

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until something is accumulated
    bool requires_grad = false;
    bool frozen = false;
    std::vector<std::shared_ptr<Node>> parents;
    BackwardFn backward;

    bool tracks_grad() const { return requires_grad && !frozen; }
    std::vector<double>& ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        return grad;
    }
};

}  // namespace detail

/// Whether newly created op results record a backward graph (thread-local).
bool grad_enabled();

/// Disables graph recording for its lifetime on the current thread.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Dense row-major array of doubles with optional participation in a
/// reverse-mode gradient tape. Copies share the underlying node.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor full(const Shape& shape, double value, bool requires_grad = false);
    static Tensor from_values(const Shape& shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(int axis) const;
    std::size_t numel() const;

    std::span<const double> values() const;
    /// Direct write access. Intended for leaves (parameters, inputs).
    std::span<double> mutable_values();
    double item() const;
    double at(std::initializer_list<std::size_t> index) const;

    bool requires_grad() const;
    void set_requires_grad(bool on);
    bool frozen() const;
    /// A frozen tensor is treated as a constant by the tape; its grad stays zero.
    void set_frozen(bool on);

    bool has_grad() const;
    /// Accumulated gradient; all zeros when nothing has been accumulated yet.
    std::span<const double> grad() const;
    void zero_grad();

    /// Same values, no tape history; gradient does not flow through the copy.
    Tensor detach() const;
    /// Deep copy of the values into a fresh leaf.
    Tensor clone() const;

    /// Back-propagates from this scalar into every reachable tensor that
    /// requires grad. Gradients accumulate; callers zero them between steps.
    void backward() const;

    bool same_node(const Tensor& other) const { return node_ == other.node_; }

    std::shared_ptr<detail::Node> node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

/// Builds an op result. The graph edge is recorded only when grad mode is on
/// and at least one parent tracks gradients.
Tensor make_result(Shape shape, std::vector<double> values, std::initializer_list<Tensor> parents,
                   detail::BackwardFn backward);
Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& parents,
                   detail::BackwardFn backward);

bool all_finite(std::span<const double> values);
/// Throws NumericError naming `what` if the tensor holds a NaN or Inf.
void require_finite(const Tensor& t, const std::string& what);

}  // namespace srr

#include "srr/tensor.hpp"

#include <cmath>
#include <numeric>
#include <unordered_set>

#include "srr/error.hpp"

namespace srr {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) { return full(shape, 0.0, requires_grad); }

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
    return from_values(shape, std::vector<double>(shape_numel(shape), value), requires_grad);
}

Tensor Tensor::from_values(const Shape& shape, std::vector<double> values, bool requires_grad) {
    if (values.size() != shape_numel(shape)) {
        throw DimensionError("tensor of shape " + shape_str(shape) + " needs " + std::to_string(shape_numel(shape)) +
                             " values, got " + std::to_string(values.size()));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = shape;
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_values({}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
    if (!node_) throw UsageError("undefined tensor");
    return node_->shape;
}

std::size_t Tensor::dim(int axis) const {
    const auto r = static_cast<int>(rank());
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
    return node_->shape[static_cast<std::size_t>(a)];
}

std::size_t Tensor::numel() const { return node_ ? node_->value.size() : 0; }

std::span<const double> Tensor::values() const {
    if (!node_) throw UsageError("undefined tensor");
    return node_->value;
}

std::span<double> Tensor::mutable_values() {
    if (!node_) throw UsageError("undefined tensor");
    return node_->value;
}

double Tensor::item() const {
    if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
    const Shape& s = shape();
    if (index.size() != s.size()) throw DimensionError("index rank mismatch for " + shape_str(s));
    std::size_t off = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
        if (i >= s[axis]) throw DimensionError("index out of range for " + shape_str(s));
        off = off * s[axis] + i;
        ++axis;
    }
    return node_->value[off];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
    if (!node_) throw UsageError("undefined tensor");
    node_->requires_grad = on;
}

bool Tensor::frozen() const { return node_ && node_->frozen; }

void Tensor::set_frozen(bool on) {
    if (!node_) throw UsageError("undefined tensor");
    node_->frozen = on;
    if (on) node_->grad.assign(node_->value.size(), 0.0);
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!node_) throw UsageError("undefined tensor");
    return node_->ensure_grad();
}

void Tensor::zero_grad() {
    if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return from_values(shape(), node_->value, false); }

Tensor Tensor::clone() const { return from_values(shape(), node_->value, node_->requires_grad); }

void Tensor::backward() const {
    if (!node_) throw UsageError("backward() on undefined tensor");
    if (node_->value.size() != 1) throw UsageError("backward() requires a scalar, got shape " + shape_str(node_->shape));
    if (!node_->tracks_grad()) return;

    // post-order DFS gives a topological order with parents before children
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            detail::Node* p = n->parents[next++].get();
            if (p->tracks_grad() && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    node_->ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backward && !n->grad.empty()) n->backward(*n);
    }
}

Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& parents,
                   detail::BackwardFn backward) {
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    if (g_grad_enabled) {
        bool any = false;
        for (const auto& p : parents) any = any || (p.defined() && p.node()->tracks_grad());
        if (any) {
            node->requires_grad = true;
            node->parents.reserve(parents.size());
            for (const auto& p : parents) node->parents.push_back(p.node());
            node->backward = std::move(backward);
        }
    }
    return Tensor(std::move(node));
}

Tensor make_result(Shape shape, std::vector<double> values, std::initializer_list<Tensor> parents,
                   detail::BackwardFn backward) {
    return make_result(std::move(shape), std::move(values), std::vector<Tensor>(parents), std::move(backward));
}

bool all_finite(std::span<const double> values) {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

void require_finite(const Tensor& t, const std::string& what) {
    if (!all_finite(t.values())) throw NumericError("non-finite values in " + what);
}

}  // namespace srr

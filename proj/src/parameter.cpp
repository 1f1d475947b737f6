#include "srr/parameter.hpp"

#include <cmath>

#include "srr/error.hpp"

namespace srr {

namespace init {

Initializer zeros() {
    return [](Rng&) { return 0.0; };
}

Initializer constant(double value) {
    return [value](Rng&) { return value; };
}

Initializer trunc_normal(double stddev) {
    return [stddev](Rng& rng) { return rng.truncated_normal(0.0, stddev); };
}

Initializer conv_fan_out(std::size_t fan_out) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_out));
    return [stddev](Rng& rng) { return rng.normal(0.0, stddev); };
}

}  // namespace init

Tensor ParameterStore::add(const std::string& name, const Shape& shape, const Initializer& initializer, Rng& rng) {
    if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = initializer(rng);
    Tensor t = Tensor::from_values(shape, std::move(values), true);
    index_.emplace(name, params_.size());
    params_.push_back({name, t});
    return t;
}

Tensor ParameterStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UsageError("unknown parameter '" + name + "'");
    return params_[it->second].tensor;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

void ParameterStore::set_frozen(const std::string& prefix, bool frozen) {
    for (auto& p : params_)
        if (p.name.rfind(prefix, 0) == 0) p.tensor.set_frozen(frozen);
}

std::size_t count_parameters(const ParameterStore& store) {
    std::size_t total = 0;
    for (const auto& p : store.parameters()) total += p.tensor.numel();
    return total;
}

}  // namespace srr

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "srr/rng.hpp"
#include "srr/tensor.hpp"

namespace srr {

struct Parameter {
    std::string name;
    Tensor tensor;
};

using Initializer = std::function<double(Rng&)>;

namespace init {
Initializer zeros();
Initializer constant(double value);
/// Normal with the given stddev, truncated at two sigma.
Initializer trunc_normal(double stddev);
/// He-style normal for a convolution with the given fan-out.
Initializer conv_fan_out(std::size_t fan_out);
}  // namespace init

/// Ordered registry of named trainable tensors. Names are unique; a tensor
/// registered once may be referenced by several layers (weight sharing).
class ParameterStore {
public:
    Tensor add(const std::string& name, const Shape& shape, const Initializer& initializer, Rng& rng);

    const std::vector<Parameter>& parameters() const { return params_; }
    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    Tensor get(const std::string& name) const;

    void zero_grad();
    /// Freezes or unfreezes every parameter whose name starts with `prefix`.
    void set_frozen(const std::string& prefix, bool frozen);

private:
    std::vector<Parameter> params_;
    std::map<std::string, std::size_t> index_;
};

/// Total scalar count over all registered parameters.
std::size_t count_parameters(const ParameterStore& store);

}  // namespace srr

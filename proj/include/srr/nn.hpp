#pragma once

#include <string>

#include "srr/ops.hpp"
#include "srr/parameter.hpp"

namespace srr::nn {

struct Linear {
    Tensor weight;  // [out, in]
    Tensor bias;    // [out]

    static Linear create(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
    Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
};

struct LayerNorm {
    Tensor gamma;
    Tensor beta;

    static LayerNorm create(ParameterStore& store, const std::string& name, std::size_t channels, Rng& rng);
    Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta, 1e-6); }
};

struct Conv2d {
    Tensor weight;  // [out, in, k, k]
    Tensor bias;    // [out]
    std::size_t stride = 1;
    std::size_t padding = 0;

    static Conv2d create(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                         std::size_t kernel, std::size_t stride, std::size_t padding, Rng& rng);
    Tensor operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }
};

}  // namespace srr::nn

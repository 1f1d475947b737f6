#include "srr/nn.hpp"

namespace srr::nn {

Linear Linear::create(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    Linear l;
    l.weight = store.add(name + ".weight", {out, in}, init::trunc_normal(0.02), rng);
    l.bias = store.add(name + ".bias", {out}, init::zeros(), rng);
    return l;
}

LayerNorm LayerNorm::create(ParameterStore& store, const std::string& name, std::size_t channels, Rng& rng) {
    LayerNorm n;
    n.gamma = store.add(name + ".weight", {channels}, init::constant(1.0), rng);
    n.beta = store.add(name + ".bias", {channels}, init::zeros(), rng);
    return n;
}

Conv2d Conv2d::create(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                      std::size_t kernel, std::size_t stride, std::size_t padding, Rng& rng) {
    Conv2d c;
    c.weight = store.add(name + ".weight", {out, in, kernel, kernel}, init::conv_fan_out(kernel * kernel * out), rng);
    c.bias = store.add(name + ".bias", {out}, init::zeros(), rng);
    c.stride = stride;
    c.padding = padding;
    return c;
}

}  // namespace srr::nn

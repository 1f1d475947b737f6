#pragma once

#include <vector>

#include "srr/parameter.hpp"

namespace srr {

struct AdamWConfig {
    double lr = 6e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;  // decoupled; applied to matrices and kernels only
};

/// Adam with decoupled weight decay over every non-frozen parameter of a store.
class AdamW {
public:
    AdamW(ParameterStore& store, const AdamWConfig& cfg);

    void step();
    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }
    std::size_t steps() const { return t_; }

private:
    ParameterStore& store_;
    AdamWConfig cfg_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace srr

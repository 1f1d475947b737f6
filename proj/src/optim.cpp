#include "srr/optim.hpp"

#include <cmath>

#include "srr/error.hpp"

namespace srr {

AdamW::AdamW(ParameterStore& store, const AdamWConfig& cfg) : store_(store), cfg_(cfg) {
    if (!(cfg.lr > 0.0) || cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0 ||
        !(cfg.eps > 0.0) || cfg.weight_decay < 0.0) {
        throw ConfigError("invalid AdamW hyper-parameters");
    }
    for (const Parameter& p : store.parameters()) {
        m_.emplace_back(p.tensor.numel(), 0.0);
        v_.emplace_back(p.tensor.numel(), 0.0);
    }
}

void AdamW::step() {
    const auto& params = store_.parameters();
    if (params.size() != m_.size()) throw UsageError("parameter store changed after optimizer construction");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor w = params[i].tensor;
        if (w.frozen() || !w.has_grad()) continue;
        const auto g = w.grad();
        auto x = w.mutable_values();
        auto& m = m_[i];
        auto& v = v_[i];
        const double decay = w.rank() >= 2 ? cfg_.lr * cfg_.weight_decay : 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
            x[j] -= decay * x[j];
            x[j] -= cfg_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
        }
    }
}

}  // namespace srr

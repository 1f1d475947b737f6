#include "srr/loss.hpp"

#include <cmath>

#include "srr/error.hpp"

namespace srr {

void LossConfig::validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("loss gamma must be finite and >= 0");
}

Tensor logit_difference(const Tensor& mask_logits) {
    if (mask_logits.rank() != 4 || mask_logits.dim(1) != 2) {
        throw DimensionError("mask logits must be [B,2,H,W], got " + shape_str(mask_logits.shape()));
    }
    return slice(mask_logits, 1, 1, 1) - slice(mask_logits, 1, 0, 1);
}

Tensor error_target_map(const Tensor& gt, const Tensor& mask, ErrorTarget target, std::size_t height,
                        std::size_t width) {
    if (gt.shape() != mask.shape() || gt.rank() != 4 || gt.dim(1) != 1) {
        throw DimensionError("error target needs matching [B,1,H,W] maps, got " + shape_str(gt.shape()) + " and " +
                             shape_str(mask.shape()));
    }
    const auto g = gt.values();
    const auto m = mask.values();
    std::vector<double> t(g.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = target == ErrorTarget::Absolute ? std::abs(g[i] - m[i]) : g[i] - m[i];
    Tensor full = Tensor::from_values(gt.shape(), std::move(t));
    if (gt.dim(2) == height && gt.dim(3) == width) return full;
    if (height == 0 || gt.dim(2) % height != 0 || gt.dim(3) % width != 0 || gt.dim(2) / height != gt.dim(3) / width) {
        throw DimensionError("cannot pool a " + shape_str(gt.shape()) + " target to " + std::to_string(height) + "x" +
                             std::to_string(width));
    }
    NoGradGuard guard;
    return avg_pool2d(full, gt.dim(2) / height);
}

LossTerms compute_loss(const Tensor& mask_logits, const Tensor& error, const Tensor& gt, const LossConfig& cfg) {
    cfg.validate();
    const Tensor diff = logit_difference(mask_logits);
    if (diff.shape() != gt.shape()) {
        throw DimensionError("ground truth " + shape_str(gt.shape()) + " does not match mask logits " +
                             shape_str(mask_logits.shape()));
    }
    LossTerms terms;
    terms.bce = bce_with_logits(diff, gt);
    const Tensor binary = argmax_mask(mask_logits.detach());
    const Tensor target = error_target_map(gt, binary, cfg.error_target, error.dim(2), error.dim(3));
    terms.mse = mse(error, target);
    terms.total = terms.bce + scale(terms.mse, cfg.gamma);
    return terms;
}

LossTerms compute_loss(const PredictionPair& pred, const Tensor& gt, const LossConfig& cfg) {
    return compute_loss(pred.mask_logits, pred.error, gt, cfg);
}

}  // namespace srr

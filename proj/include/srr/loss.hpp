#pragma once

#include "srr/decoder.hpp"

namespace srr {

struct LossConfig {
    double gamma = 1.0;  // weight of the error-matrix term
    ErrorTarget error_target = ErrorTarget::Absolute;

    void validate() const;
};

struct LossTerms {
    Tensor total;
    Tensor bce;
    Tensor mse;
};

/// Error-matrix target from a ground truth and a binary predicted mask, both
/// [B,1,H,W]: |gt - mask| (absolute) or gt - mask (signed), area-averaged
/// down to height x width when the extents differ.
Tensor error_target_map(const Tensor& gt, const Tensor& mask, ErrorTarget target, std::size_t height,
                        std::size_t width);

/// BCE on the foreground-minus-background logit of `mask_logits` [B,2,H,W]
/// against `gt` [B,1,H,W], plus gamma * MSE between `error` and the target
/// built from the argmax of the (detached) logits.
LossTerms compute_loss(const Tensor& mask_logits, const Tensor& error, const Tensor& gt, const LossConfig& cfg);
LossTerms compute_loss(const PredictionPair& pred, const Tensor& gt, const LossConfig& cfg);

/// Foreground-minus-background logit, [B,1,H,W].
Tensor logit_difference(const Tensor& mask_logits);

}  // namespace srr

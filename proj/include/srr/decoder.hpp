#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "srr/backbone.hpp"

namespace srr {

/// What the error head regresses: |gt - mask| in (0,1) via a sigmoid, or the
/// signed difference in (-1,1) via tanh.
enum class ErrorTarget { Absolute, Signed };

std::string_view to_string(ErrorTarget target);
ErrorTarget parse_error_target(std::string_view text);

struct DecoderConfig {
    std::size_t ch_prime = 64;          // fusion width
    std::size_t ch_double_prime = 32;   // head width
    bool full_resolution = true;        // upsample mask logits to the input extent
    ErrorTarget error_target = ErrorTarget::Absolute;

    void validate() const;
};

struct MaskOutput {
    Tensor logits_low;  // [B,2,H/4,W/4]
    Tensor logits;      // [B,2,H,W] (or the low-res logits without full_resolution)
    Tensor mask;        // [B,1,..] in {0,1}, no gradient
};

/// Decoder output for one batch.
struct PredictionPair {
    Tensor mask_logits;      // supervised logits, [B,2,H,W] at full resolution
    Tensor mask_logits_low;  // [B,2,H/4,W/4]
    Tensor mask;             // O_msk, [B,1,H,W] binary
    Tensor error;            // O_err, [B,1,H/4,W/4]
    std::vector<double> scores;  // per batch element

    /// Foreground softmax probability at mask resolution, [B,1,H,W].
    Tensor foreground_probability() const;
};

/// Argmax over a two-channel logit map; equal logits select background.
Tensor argmax_mask(const Tensor& logits);

/// Arithmetic mean of an error map over all positions.
double mae_score(const Tensor& error);
/// Per-batch-element mean of an error map [B,1,h,w]; absolute values in signed mode.
std::vector<double> batch_scores(const Tensor& error, ErrorTarget target);

/// Applies a Linear over the channel axis of a [B,C,H,W] map.
Tensor pointwise(const nn::Linear& layer, const Tensor& map);

class Decoder {
public:
    Decoder(ParameterStore& store, const std::array<std::size_t, 4>& stage_channels, const DecoderConfig& cfg, Rng& rng);

    /// Concat(C_i, P_i, R_i) -> Linear(3 Ch_i, Ch') -> resize to height x width.
    Tensor fuse_stage(const StageFeatures& f, std::size_t stage, std::size_t height, std::size_t width) const;
    /// Concat(F_1..F_4) -> Linear(4 Ch', Ch') -> 3x3 conv (Ch' -> Ch'').
    Tensor fuse_all(std::span<const Tensor> fused) const;
    MaskOutput predict_mask(const Tensor& features, std::size_t height, std::size_t width) const;
    /// Linear(Ch''+2, 1) over Concat(F, M) with M behind a stop-gradient.
    Tensor predict_error(const Tensor& features, const Tensor& mask_logits_low) const;

    PredictionPair forward(const PyramidFeatures& features, std::size_t height, std::size_t width) const;

    const DecoderConfig& config() const { return cfg_; }
    const nn::Linear& fuse_all_layer() const { return fuse_all_; }
    const nn::Conv2d& conv() const { return conv_; }
    const nn::Linear& mask_head() const { return mask_head_; }
    const nn::Linear& error_head() const { return error_head_; }

private:
    DecoderConfig cfg_;
    std::array<std::size_t, 4> stage_channels_;
    std::array<nn::Linear, 4> fuse_;
    nn::Linear fuse_all_;
    nn::Conv2d conv_;
    nn::Linear mask_head_;
    nn::Linear error_head_;
};

}  // namespace srr

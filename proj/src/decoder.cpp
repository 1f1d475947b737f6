#include "srr/decoder.hpp"

#include <cmath>

#include "srr/error.hpp"

namespace srr {

std::string_view to_string(ErrorTarget target) { return target == ErrorTarget::Absolute ? "absolute" : "signed"; }

ErrorTarget parse_error_target(std::string_view text) {
    if (text == "absolute") return ErrorTarget::Absolute;
    if (text == "signed") return ErrorTarget::Signed;
    throw ConfigError("unknown error_target '" + std::string(text) + "' (expected absolute|signed)");
}

void DecoderConfig::validate() const {
    if (ch_prime == 0 || ch_double_prime == 0) throw ConfigError("decoder widths must be positive");
}

Tensor PredictionPair::foreground_probability() const { return slice(softmax(mask_logits, 1), 1, 1, 1); }

Tensor argmax_mask(const Tensor& logits) {
    if (logits.rank() != 4 || logits.dim(1) != 2) {
        throw DimensionError("argmax_mask expects [B,2,H,W], got " + shape_str(logits.shape()));
    }
    const std::size_t b = logits.dim(0), plane = logits.dim(2) * logits.dim(3);
    const auto v = logits.values();
    std::vector<double> out(b * plane);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < plane; ++j) out[i * plane + j] = v[(2 * i + 1) * plane + j] > v[2 * i * plane + j] ? 1.0 : 0.0;
    return Tensor::from_values({b, 1, logits.dim(2), logits.dim(3)}, std::move(out));
}

double mae_score(const Tensor& error) {
    if (error.numel() == 0) throw DimensionError("mae_score of an empty map");
    double total = 0.0;
    for (double v : error.values()) total += v;
    return total / static_cast<double>(error.numel());
}

std::vector<double> batch_scores(const Tensor& error, ErrorTarget target) {
    const std::size_t b = error.dim(0), per = error.numel() / b;
    const auto v = error.values();
    std::vector<double> scores(b, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < per; ++j) {
            const double e = v[i * per + j];
            total += target == ErrorTarget::Absolute ? e : std::abs(e);
        }
        scores[i] = total / static_cast<double>(per);
    }
    return scores;
}

Tensor pointwise(const nn::Linear& layer, const Tensor& map) {
    return tokens_to_map(layer(map_to_tokens(map)), map.dim(2), map.dim(3));
}

Decoder::Decoder(ParameterStore& store, const std::array<std::size_t, 4>& stage_channels, const DecoderConfig& cfg,
                 Rng& rng)
    : cfg_(cfg), stage_channels_(stage_channels) {
    cfg.validate();
    for (std::size_t i = 0; i < 4; ++i) {
        fuse_[i] = nn::Linear::create(store, "decoder.fuse" + std::to_string(i + 1), 3 * stage_channels[i],
                                      cfg.ch_prime, rng);
    }
    fuse_all_ = nn::Linear::create(store, "decoder.fuse_all", 4 * cfg.ch_prime, cfg.ch_prime, rng);
    conv_ = nn::Conv2d::create(store, "decoder.conv", cfg.ch_prime, cfg.ch_double_prime, 3, 1, 1, rng);
    mask_head_ = nn::Linear::create(store, "decoder.mask_head", cfg.ch_double_prime, 2, rng);
    error_head_ = nn::Linear::create(store, "decoder.error_head", cfg.ch_double_prime + 2, 1, rng);
}

Tensor Decoder::fuse_stage(const StageFeatures& f, std::size_t stage, std::size_t height, std::size_t width) const {
    if (stage >= 4) throw UsageError("stage index out of range");
    if (f.c.shape() != f.p.shape() || f.c.shape() != f.r.shape()) {
        throw DimensionError("stage features disagree: " + shape_str(f.c.shape()) + ", " + shape_str(f.p.shape()) +
                             ", " + shape_str(f.r.shape()));
    }
    if (f.c.dim(1) != stage_channels_[stage]) {
        throw DimensionError("stage " + std::to_string(stage + 1) + " features have " + std::to_string(f.c.dim(1)) +
                             " channels, decoder expects " + std::to_string(stage_channels_[stage]));
    }
    const Tensor joined = concat({f.c, f.p, f.r}, 1);
    const Tensor projected = pointwise(fuse_[stage], joined);
    if (projected.dim(2) == height && projected.dim(3) == width) return projected;
    return bilinear_resize(projected, height, width);
}

Tensor Decoder::fuse_all(std::span<const Tensor> fused) const {
    if (fused.size() != 4) throw DimensionError("fuse_all expects four stage maps");
    for (const Tensor& t : fused)
        if (t.shape() != fused[0].shape()) throw DimensionError("fused stage maps disagree in shape");
    return conv_(pointwise(fuse_all_, concat(fused, 1)));
}

MaskOutput Decoder::predict_mask(const Tensor& features, std::size_t height, std::size_t width) const {
    MaskOutput m;
    m.logits_low = pointwise(mask_head_, features);
    m.logits = cfg_.full_resolution ? bilinear_resize(m.logits_low, height, width) : m.logits_low;
    m.mask = argmax_mask(m.logits);
    return m;
}

Tensor Decoder::predict_error(const Tensor& features, const Tensor& mask_logits_low) const {
    if (features.dim(2) != mask_logits_low.dim(2) || features.dim(3) != mask_logits_low.dim(3)) {
        throw DimensionError("error branch inputs are not spatially aligned");
    }
    const Tensor joined = concat({features, mask_logits_low.detach()}, 1);
    const Tensor raw = pointwise(error_head_, joined);
    return cfg_.error_target == ErrorTarget::Absolute ? sigmoid(raw) : tanh(raw);
}

PredictionPair Decoder::forward(const PyramidFeatures& features, std::size_t height, std::size_t width) const {
    const std::size_t h4 = height / 4, w4 = width / 4;
    std::array<Tensor, 4> fused;
    for (std::size_t i = 0; i < 4; ++i) fused[i] = fuse_stage(features[i], i, h4, w4);
    const Tensor f = fuse_all(fused);
    MaskOutput m = predict_mask(f, height, width);
    PredictionPair out;
    out.error = predict_error(f, m.logits_low);
    out.mask_logits = m.logits;
    out.mask_logits_low = m.logits_low;
    out.mask = m.mask;
    out.scores = batch_scores(out.error, cfg_.error_target);
    return out;
}

}  // namespace srr

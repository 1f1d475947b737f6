#include "srr/backbone.hpp"

#include "srr/error.hpp"

namespace srr {

void validate_stages(const StageConfigs& stages) {
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const StageConfig& s = stages[i];
        const std::size_t want_stride = i == 0 ? 4 : 2;
        if (s.embed_stride != want_stride) {
            throw ConfigError("stage " + std::to_string(i + 1) + " embedding stride must be " +
                              std::to_string(want_stride));
        }
        if (s.embed_kernel < s.embed_stride) throw ConfigError("embedding kernel smaller than its stride");
        if (s.depth == 0) throw ConfigError("stage depth must be positive");
        if (s.attention.channels() != s.channels) {
            throw ConfigError("stage " + std::to_string(i + 1) + ": heads x head_dim != channels");
        }
        s.attention.validate();
        if (i > 0 && s.channels < stages[i - 1].channels) throw ConfigError("stage widths must be non-decreasing");
    }
}

void FrameTriplet::validate() const {
    if (current.rank() != 4 || previous.rank() != 4 || reference.rank() != 4) {
        throw DimensionError("frame triplet tensors must be [B,C,H,W]");
    }
    if (current.dim(1) != 3 || previous.dim(1) != 4 || reference.dim(1) != 4) {
        throw DimensionError("frame triplet expects 3/4/4 channels, got " + shape_str(current.shape()) + ", " +
                             shape_str(previous.shape()) + ", " + shape_str(reference.shape()));
    }
    for (const Tensor* t : {&previous, &reference}) {
        if (t->dim(0) != current.dim(0) || t->dim(2) != current.dim(2) || t->dim(3) != current.dim(3)) {
            throw DimensionError("frame triplet extents disagree: " + shape_str(current.shape()) + " vs " +
                                 shape_str(t->shape()));
        }
    }
    if (height() % 32 != 0 || width() % 32 != 0) {
        throw ConfigError("frame extent " + std::to_string(height()) + "x" + std::to_string(width()) +
                          " must be divisible by 32");
    }
    const std::size_t plane = height() * width();
    for (const Tensor* t : {&previous, &reference}) {
        const auto v = t->values();
        for (std::size_t b = 0; b < batch(); ++b)
            for (std::size_t i = 0; i < plane; ++i) {
                const double m = v[(b * 4 + 3) * plane + i];
                if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("mask channel values must lie in [0,1]");
            }
    }
}

PatchEmbedding::Tokens PatchEmbedding::operator()(const Tensor& map) const {
    if (map.dim(2) % conv.stride != 0 || map.dim(3) % conv.stride != 0) {
        throw ConfigError("spatial extent " + std::to_string(map.dim(2)) + "x" + std::to_string(map.dim(3)) +
                          " is not divisible by the embedding stride " + std::to_string(conv.stride));
    }
    const Tensor out = conv(map);
    return {norm(map_to_tokens(out)), out.dim(2), out.dim(3)};
}

Backbone::Backbone(ParameterStore& store, const StageConfigs& stages, Rng& rng) : cfg_(stages) {
    validate_stages(stages);
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const StageConfig& s = stages[i];
        const std::string name = "backbone.stage" + std::to_string(i + 1);
        const std::size_t in_c = i == 0 ? 3 : stages[i - 1].channels;
        const std::size_t in_pr = i == 0 ? 4 : stages[i - 1].channels;
        Stage st{
            {nn::Conv2d::create(store, name + ".embed.c.conv", in_c, s.channels, s.embed_kernel, s.embed_stride,
                                s.embed_padding, rng),
             nn::LayerNorm::create(store, name + ".embed.c.norm", s.channels, rng)},
            {nn::Conv2d::create(store, name + ".embed.pr.conv", in_pr, s.channels, s.embed_kernel, s.embed_stride,
                                s.embed_padding, rng),
             nn::LayerNorm::create(store, name + ".embed.pr.norm", s.channels, rng)},
            {},
            {},
            {}};
        for (std::size_t d = 0; d < s.depth; ++d) {
            st.blocks.emplace_back(store, name + ".block" + std::to_string(d), s.attention, rng);
        }
        st.norm_c = nn::LayerNorm::create(store, name + ".norm.c", s.channels, rng);
        st.norm_pr = nn::LayerNorm::create(store, name + ".norm.pr", s.channels, rng);
        stages_.push_back(std::move(st));
    }
}

PatchEmbedding::Tokens Backbone::patch_embed(const Tensor& map, std::size_t stage, EmbedBranch branch) const {
    if (stage >= stages_.size()) throw UsageError("stage index out of range");
    const Stage& st = stages_[stage];
    const PatchEmbedding& e = branch == EmbedBranch::C ? st.embed_c : st.embed_pr;
    if (map.rank() != 4 || map.dim(1) != e.conv.weight.dim(1)) {
        throw DimensionError("stage " + std::to_string(stage + 1) + " embedding expects " +
                             std::to_string(e.conv.weight.dim(1)) + " input channels, got " + shape_str(map.shape()));
    }
    return e(map);
}

StageFeatures Backbone::forward_stage(std::size_t stage, const StageFeatures& input, AttentionProbe* probe) const {
    if (stage >= stages_.size()) throw UsageError("stage index out of range");
    const Stage& st = stages_[stage];
    const auto ec = patch_embed(input.c, stage, EmbedBranch::C);
    const auto ep = patch_embed(input.p, stage, EmbedBranch::PR);
    const auto er = patch_embed(input.r, stage, EmbedBranch::PR);
    BranchTokens tokens{ec.tokens, ep.tokens, er.tokens, ec.height, ec.width};
    for (const RmaBlock& block : st.blocks) tokens = block.forward(tokens, probe);
    return {tokens_to_map(st.norm_c(tokens.c), tokens.height, tokens.width),
            tokens_to_map(st.norm_pr(tokens.p), tokens.height, tokens.width),
            tokens_to_map(st.norm_pr(tokens.r), tokens.height, tokens.width)};
}

PyramidFeatures Backbone::forward(const FrameTriplet& input, AttentionProbe* probe) const {
    input.validate();
    PyramidFeatures features;
    StageFeatures x{input.current, input.previous, input.reference};
    for (std::size_t i = 0; i < stages_.size(); ++i) {
        x = forward_stage(i, x, probe);
        features[i] = x;
    }
    return features;
}

}  // namespace srr

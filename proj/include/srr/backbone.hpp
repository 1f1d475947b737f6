#pragma once

#include <array>
#include <vector>

#include "srr/attention.hpp"

namespace srr {

struct StageConfig {
    std::size_t channels = 8;
    std::size_t depth = 1;
    AttentionConfig attention;
    std::size_t embed_kernel = 3;
    std::size_t embed_stride = 2;
    std::size_t embed_padding = 1;
};

using StageConfigs = std::array<StageConfig, 4>;

/// Rejects layouts that break the pyramid contract (stride 4 then 2, 2, 2;
/// non-decreasing widths; heads x head_dim = width).
void validate_stages(const StageConfigs& stages);

/// Network input: current frame [B,3,H,W]; previous and reference frames with
/// their masks as a fourth channel, [B,4,H,W]. Values in [0,1].
struct FrameTriplet {
    Tensor current;
    Tensor previous;
    Tensor reference;

    std::size_t batch() const { return current.dim(0); }
    std::size_t height() const { return current.dim(2); }
    std::size_t width() const { return current.dim(3); }
    void validate() const;
};

/// Feature maps of one stage, each [B, Ch_i, H_i, W_i].
struct StageFeatures {
    Tensor c, p, r;
};

using PyramidFeatures = std::array<StageFeatures, 4>;

enum class EmbedBranch { C, PR };

struct PatchEmbedding {
    nn::Conv2d conv;
    nn::LayerNorm norm;

    struct Tokens {
        Tensor tokens;  // [B, N, Ch]
        std::size_t height = 0;
        std::size_t width = 0;
    };
    Tokens operator()(const Tensor& map) const;
};

/// Four-stage pyramid of RMA blocks. The C branch has its own weights; P and
/// R share one weight set throughout (embeddings, blocks, stage norms).
class Backbone {
public:
    Backbone(ParameterStore& store, const StageConfigs& stages, Rng& rng);

    PyramidFeatures forward(const FrameTriplet& input, AttentionProbe* probe = nullptr) const;

    /// Runs stage `stage` (0-based) on the previous stage's maps, or on the
    /// raw C/P/R inputs for stage 0.
    StageFeatures forward_stage(std::size_t stage, const StageFeatures& input, AttentionProbe* probe = nullptr) const;

    /// Overlapping patch embedding of `map` at `stage` (0-based).
    PatchEmbedding::Tokens patch_embed(const Tensor& map, std::size_t stage, EmbedBranch branch) const;

    const StageConfigs& stages() const { return cfg_; }

private:
    struct Stage {
        PatchEmbedding embed_c;
        PatchEmbedding embed_pr;
        std::vector<RmaBlock> blocks;
        nn::LayerNorm norm_c;
        nn::LayerNorm norm_pr;
    };

    StageConfigs cfg_;
    std::vector<Stage> stages_;
};

}  // namespace srr

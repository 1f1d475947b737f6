#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "srr/nn.hpp"

namespace srr {

/// Which cross-branch flow the cross stage of each block uses.
enum class AttentionMode {
    SelfOnly,    // no cross stage
    MotionOnly,  // C attends (C, P); P and R attend themselves
    Full,        // every branch attends (C, P, R)
    Rma,         // R -> R, P -> (P, R), C -> (C, P, R)
};

std::string_view to_string(AttentionMode mode);
AttentionMode parse_attention_mode(std::string_view text);

struct AttentionConfig {
    std::size_t heads = 1;
    std::size_t head_dim = 8;
    std::size_t sr_ratio = 1;   // spatial reduction of keys/values, power of two
    std::size_t mlp_ratio = 4;  // hidden expansion of the feed-forward sublayer
    AttentionMode mode = AttentionMode::Rma;
    bool share_cross_qkv = true;  // cross stage reuses the self-attention projections

    std::size_t channels() const { return heads * head_dim; }
    void validate() const;
};

/// Token matrices of the three branches, each [B, N, Ch] with N = height * width.
struct BranchTokens {
    Tensor c;
    Tensor p;
    Tensor r;
    std::size_t height = 0;
    std::size_t width = 0;

    void validate() const;
};

struct AttentionOutput {
    Tensor out;    // [B, Nq, D]
    Tensor probs;  // [B, heads, Nq, Nk]
};

/// Multi-head softmax(Q K^T / sqrt(head_dim)) V on already-projected
/// q [B,Nq,D], k/v [B,Nk,D]. Heads are concatenated and, when `proj` is
/// given, passed through the output projection.
AttentionOutput scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionConfig& cfg,
                                     const nn::Linear* proj);

struct JointKV {
    Tensor k_u, v_u;  // (P, R)
    Tensor k_w, v_w;  // (C, P, R)
};

/// Concatenates key/value rows along the token axis in branch order.
JointKV build_joint_kv(const Tensor& k_c, const Tensor& k_p, const Tensor& k_r, const Tensor& v_c, const Tensor& v_p,
                       const Tensor& v_r);

/// Query/key/value projections of one branch weight set.
struct AttentionWeights {
    nn::Linear q;
    nn::Linear kv;  // [2D, D]: keys then values
    nn::Linear proj;
    std::optional<nn::Conv2d> sr;  // present when sr_ratio > 1
    std::optional<nn::LayerNorm> sr_norm;

    static AttentionWeights create(ParameterStore& store, const std::string& name, const AttentionConfig& cfg, Rng& rng);

    Tensor query(const Tensor& tokens) const { return q(tokens); }
    /// Keys and values of `tokens` laid out on a height x width grid.
    std::pair<Tensor, Tensor> keys_values(const Tensor& tokens, std::size_t height, std::size_t width) const;
};

/// Cross-stage attention outputs per branch (after output projection) and
/// the attention probabilities that produced them.
struct RmaAttention {
    AttentionOutput c, p, r;
};

/// Cross-branch attention of the configured mode. `c_weights` drives the C
/// branch, `pr_weights` both P and R.
RmaAttention rma_attend(const BranchTokens& tokens, const AttentionWeights& c_weights,
                        const AttentionWeights& pr_weights, const AttentionConfig& cfg);

/// Collects every attention probability tensor produced during a forward pass.
struct AttentionProbe {
    std::vector<Tensor> probs;
};

struct BranchBlockWeights {
    nn::LayerNorm norm_self;
    nn::LayerNorm norm_cross;
    nn::LayerNorm norm_mlp;
    AttentionWeights self_attn;
    std::optional<AttentionWeights> cross_attn;  // only when projections are not shared
    nn::Linear fc1;
    nn::Linear fc2;

    static BranchBlockWeights create(ParameterStore& store, const std::string& name, const AttentionConfig& cfg, Rng& rng);
    const AttentionWeights& cross() const { return cross_attn ? *cross_attn : self_attn; }
};

/// Pre-norm transformer block over three branches: self-attention, the
/// asymmetric cross stage, and an MLP, each with a residual connection.
class RmaBlock {
public:
    RmaBlock(ParameterStore& store, const std::string& name, const AttentionConfig& cfg, Rng& rng);

    BranchTokens forward(const BranchTokens& tokens, AttentionProbe* probe = nullptr) const;

    const AttentionConfig& config() const { return cfg_; }
    const BranchBlockWeights& c_weights() const { return c_; }
    const BranchBlockWeights& pr_weights() const { return pr_; }

private:
    AttentionConfig cfg_;
    BranchBlockWeights c_;
    BranchBlockWeights pr_;
};

}  // namespace srr

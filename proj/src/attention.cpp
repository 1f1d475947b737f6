#include "srr/attention.hpp"

#include <cmath>

#include "srr/error.hpp"

namespace srr {

std::string_view to_string(AttentionMode mode) {
    switch (mode) {
        case AttentionMode::SelfOnly: return "self_only";
        case AttentionMode::MotionOnly: return "motion_only";
        case AttentionMode::Full: return "full";
        case AttentionMode::Rma: return "rma";
    }
    return "rma";
}

AttentionMode parse_attention_mode(std::string_view text) {
    if (text == "self_only") return AttentionMode::SelfOnly;
    if (text == "motion_only") return AttentionMode::MotionOnly;
    if (text == "full") return AttentionMode::Full;
    if (text == "rma") return AttentionMode::Rma;
    throw ConfigError("unknown attention_mode '" + std::string(text) + "' (expected self_only|motion_only|full|rma)");
}

void AttentionConfig::validate() const {
    if (heads == 0 || head_dim == 0) throw ConfigError("attention needs at least one head of positive width");
    if (sr_ratio == 0 || (sr_ratio & (sr_ratio - 1)) != 0) {
        throw ConfigError("sr_ratio must be a power of two, got " + std::to_string(sr_ratio));
    }
    if (mlp_ratio < 1) throw ConfigError("mlp_ratio must be >= 1");
}

void BranchTokens::validate() const {
    if (c.shape() != p.shape() || c.shape() != r.shape()) {
        throw DimensionError("branch tokens disagree: C " + shape_str(c.shape()) + ", P " + shape_str(p.shape()) +
                             ", R " + shape_str(r.shape()));
    }
    if (c.rank() != 3 || c.dim(1) != height * width) {
        throw DimensionError("branch tokens " + shape_str(c.shape()) + " do not cover a " + std::to_string(height) +
                             "x" + std::to_string(width) + " grid");
    }
}

AttentionOutput scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionConfig& cfg,
                                     const nn::Linear* proj) {
    if (q.rank() != 3 || k.rank() != 3 || v.rank() != 3) {
        throw DimensionError("attention expects [B,N,D] operands, got " + shape_str(q.shape()) + ", " +
                             shape_str(k.shape()) + ", " + shape_str(v.shape()));
    }
    const std::size_t batch = q.dim(0), nq = q.dim(1), d = q.dim(2), nk = k.dim(1);
    if (nk == 0) throw UsageError("attention over zero keys");
    if (d != cfg.channels() || k.dim(2) != d || v.dim(2) != d) {
        throw DimensionError("attention width " + std::to_string(d) + " does not match heads x head_dim = " +
                             std::to_string(cfg.channels()));
    }
    if (k.shape() != v.shape() || k.dim(0) != batch) {
        throw DimensionError("keys " + shape_str(k.shape()) + " and values " + shape_str(v.shape()) + " disagree");
    }
    const std::size_t h = cfg.heads, hd = cfg.head_dim;
    const Tensor qh = permute(reshape(q, {batch, nq, h, hd}), {0, 2, 1, 3});
    const Tensor kh = permute(reshape(k, {batch, nk, h, hd}), {0, 2, 1, 3});
    const Tensor vh = permute(reshape(v, {batch, nk, h, hd}), {0, 2, 1, 3});
    const Tensor scores = scale(matmul_transposed(qh, kh), 1.0 / std::sqrt(static_cast<double>(hd)));
    Tensor probs = softmax(scores, -1);
    Tensor out = reshape(permute(matmul(probs, vh), {0, 2, 1, 3}), {batch, nq, d});
    if (proj) out = (*proj)(out);
    return {out, probs};
}

JointKV build_joint_kv(const Tensor& k_c, const Tensor& k_p, const Tensor& k_r, const Tensor& v_c, const Tensor& v_p,
                       const Tensor& v_r) {
    JointKV j;
    j.k_u = concat({k_p, k_r}, 1);
    j.v_u = concat({v_p, v_r}, 1);
    j.k_w = concat({k_c, k_p, k_r}, 1);
    j.v_w = concat({v_c, v_p, v_r}, 1);
    return j;
}

AttentionWeights AttentionWeights::create(ParameterStore& store, const std::string& name, const AttentionConfig& cfg,
                                          Rng& rng) {
    cfg.validate();
    const std::size_t d = cfg.channels();
    AttentionWeights w;
    w.q = nn::Linear::create(store, name + ".q", d, d, rng);
    w.kv = nn::Linear::create(store, name + ".kv", d, 2 * d, rng);
    w.proj = nn::Linear::create(store, name + ".proj", d, d, rng);
    if (cfg.sr_ratio > 1) {
        w.sr = nn::Conv2d::create(store, name + ".sr", d, d, cfg.sr_ratio, cfg.sr_ratio, 0, rng);
        w.sr_norm = nn::LayerNorm::create(store, name + ".sr_norm", d, rng);
    }
    return w;
}

std::pair<Tensor, Tensor> AttentionWeights::keys_values(const Tensor& tokens, std::size_t height,
                                                        std::size_t width) const {
    Tensor src = tokens;
    if (sr) {
        if (height % sr->stride != 0 || width % sr->stride != 0) {
            throw ConfigError("token grid " + std::to_string(height) + "x" + std::to_string(width) +
                              " not divisible by sr_ratio " + std::to_string(sr->stride));
        }
        src = (*sr_norm)(map_to_tokens((*sr)(tokens_to_map(tokens, height, width))));
    }
    const Tensor both = kv(src);
    const std::size_t d = tokens.dim(2);
    return {slice(both, -1, 0, d), slice(both, -1, d, d)};
}

RmaAttention rma_attend(const BranchTokens& tokens, const AttentionWeights& c_weights,
                        const AttentionWeights& pr_weights, const AttentionConfig& cfg) {
    tokens.validate();
    const std::size_t h = tokens.height, w = tokens.width;
    const Tensor q_c = c_weights.query(tokens.c);
    const Tensor q_p = pr_weights.query(tokens.p);
    const Tensor q_r = pr_weights.query(tokens.r);
    const auto [k_c, v_c] = c_weights.keys_values(tokens.c, h, w);
    const auto [k_p, v_p] = pr_weights.keys_values(tokens.p, h, w);
    const auto [k_r, v_r] = pr_weights.keys_values(tokens.r, h, w);

    auto attend = [&](const Tensor& q, const Tensor& k, const Tensor& v, const AttentionWeights& wts) {
        return scaled_dot_attention(q, k, v, cfg, &wts.proj);
    };

    RmaAttention a;
    switch (cfg.mode) {
        case AttentionMode::SelfOnly:
            a.c = attend(q_c, k_c, v_c, c_weights);
            a.p = attend(q_p, k_p, v_p, pr_weights);
            a.r = attend(q_r, k_r, v_r, pr_weights);
            break;
        case AttentionMode::MotionOnly:
            a.c = attend(q_c, concat({k_c, k_p}, 1), concat({v_c, v_p}, 1), c_weights);
            a.p = attend(q_p, k_p, v_p, pr_weights);
            a.r = attend(q_r, k_r, v_r, pr_weights);
            break;
        case AttentionMode::Full: {
            const JointKV j = build_joint_kv(k_c, k_p, k_r, v_c, v_p, v_r);
            a.c = attend(q_c, j.k_w, j.v_w, c_weights);
            a.p = attend(q_p, j.k_w, j.v_w, pr_weights);
            a.r = attend(q_r, j.k_w, j.v_w, pr_weights);
            break;
        }
        case AttentionMode::Rma: {
            const JointKV j = build_joint_kv(k_c, k_p, k_r, v_c, v_p, v_r);
            a.r = attend(q_r, k_r, v_r, pr_weights);
            a.p = attend(q_p, j.k_u, j.v_u, pr_weights);
            a.c = attend(q_c, j.k_w, j.v_w, c_weights);
            break;
        }
    }
    return a;
}

BranchBlockWeights BranchBlockWeights::create(ParameterStore& store, const std::string& name,
                                              const AttentionConfig& cfg, Rng& rng) {
    const std::size_t d = cfg.channels();
    BranchBlockWeights b;
    b.norm_self = nn::LayerNorm::create(store, name + ".norm_self", d, rng);
    b.self_attn = AttentionWeights::create(store, name + ".attn", cfg, rng);
    if (cfg.mode != AttentionMode::SelfOnly) {
        b.norm_cross = nn::LayerNorm::create(store, name + ".norm_cross", d, rng);
        if (!cfg.share_cross_qkv) b.cross_attn = AttentionWeights::create(store, name + ".cross_attn", cfg, rng);
    }
    b.norm_mlp = nn::LayerNorm::create(store, name + ".norm_mlp", d, rng);
    b.fc1 = nn::Linear::create(store, name + ".mlp.fc1", d, d * cfg.mlp_ratio, rng);
    b.fc2 = nn::Linear::create(store, name + ".mlp.fc2", d * cfg.mlp_ratio, d, rng);
    return b;
}

RmaBlock::RmaBlock(ParameterStore& store, const std::string& name, const AttentionConfig& cfg, Rng& rng)
    : cfg_(cfg),
      c_(BranchBlockWeights::create(store, name + ".c", cfg, rng)),
      pr_(BranchBlockWeights::create(store, name + ".pr", cfg, rng)) {}

BranchTokens RmaBlock::forward(const BranchTokens& tokens, AttentionProbe* probe) const {
    tokens.validate();
    const std::size_t h = tokens.height, w = tokens.width;

    auto self_stage = [&](const Tensor& x, const BranchBlockWeights& wts) {
        const Tensor n = wts.norm_self(x);
        const auto [k, v] = wts.self_attn.keys_values(n, h, w);
        const AttentionOutput a = scaled_dot_attention(wts.self_attn.query(n), k, v, cfg_, &wts.self_attn.proj);
        if (probe) probe->probs.push_back(a.probs);
        return x + a.out;
    };
    auto mlp_stage = [](const Tensor& x, const BranchBlockWeights& wts) {
        return x + wts.fc2(gelu(wts.fc1(wts.norm_mlp(x))));
    };

    BranchTokens out{self_stage(tokens.c, c_), self_stage(tokens.p, pr_), self_stage(tokens.r, pr_), h, w};

    if (cfg_.mode != AttentionMode::SelfOnly) {
        const BranchTokens normed{c_.norm_cross(out.c), pr_.norm_cross(out.p), pr_.norm_cross(out.r), h, w};
        const RmaAttention cross = rma_attend(normed, c_.cross(), pr_.cross(), cfg_);
        if (probe) {
            probe->probs.push_back(cross.c.probs);
            probe->probs.push_back(cross.p.probs);
            probe->probs.push_back(cross.r.probs);
        }
        out.c = out.c + cross.c.out;
        out.p = out.p + cross.p.out;
        out.r = out.r + cross.r.out;
    }

    out.c = mlp_stage(out.c, c_);
    out.p = mlp_stage(out.p, pr_);
    out.r = mlp_stage(out.r, pr_);
    return out;
}

}  // namespace srr

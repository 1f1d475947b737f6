#include "srr/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "srr/error.hpp"

namespace srr {

namespace {

// Earliest cached value a parameter influences, in evaluation order.
enum Level : std::size_t {
    kStage1 = 0,  // ..kStage1 + 3
    kFuse1 = 4,   // ..kFuse1 + 3
    kFuseAll = 8,
    kConv = 9,
    kHeads = 10,
};

std::size_t level_of(const std::string& name) {
    const std::string stage = "backbone.stage";
    if (name.rfind(stage, 0) == 0) {
        const std::size_t s = static_cast<std::size_t>(name[stage.size()] - '1');
        if (s < 4) return kStage1 + s;
    }
    const std::string fuse = "decoder.fuse";
    if (name.rfind("decoder.fuse_all.", 0) == 0) return kFuseAll;
    if (name.rfind(fuse, 0) == 0) {
        const std::size_t s = static_cast<std::size_t>(name[fuse.size()] - '1');
        if (s < 4) return kFuse1 + s;
    }
    if (name.rfind("decoder.conv.", 0) == 0) return kConv;
    if (name.rfind("decoder.mask_head.", 0) == 0 || name.rfind("decoder.error_head.", 0) == 0) return kHeads;
    throw UsageError("cannot place parameter '" + name + "' in the pipeline");
}

// Loss with stop-gradient inputs frozen at the unperturbed point. Intermediate
// values upstream of a perturbed parameter are reused bit-for-bit.
class FrozenLoss {
public:
    FrozenLoss(const SrrNet& net, const GradcheckSample& sample, const LossConfig& cfg)
        : net_(net), sample_(sample), cfg_(cfg), h_(sample.input.height()), w_(sample.input.width()) {
        NoGradGuard guard;
        StageFeatures x{sample.input.current, sample.input.previous, sample.input.reference};
        for (std::size_t i = 0; i < 4; ++i) {
            x = net.backbone().forward_stage(i, x);
            stages_[i] = x;
        }
        const Decoder& dec = net.decoder();
        for (std::size_t i = 0; i < 4; ++i) fused_[i] = dec.fuse_stage(stages_[i], i, h_ / 4, w_ / 4);
        mixed_ = pointwise(dec.fuse_all_layer(), concat(fused_, 1));
        features_ = dec.conv()(mixed_);
        const MaskOutput m = dec.predict_mask(features_, h_, w_);
        mask_low_ = m.logits_low;
        target_ = error_target_map(sample.gt, m.mask, cfg.error_target, h_ / 4, w_ / 4);
    }

    double evaluate(std::size_t level) const {
        NoGradGuard guard;
        const Decoder& dec = net_.decoder();
        std::array<Tensor, 4> fused = fused_;
        if (level < kFuse1) {
            StageFeatures x = level == kStage1 ? StageFeatures{sample_.input.current, sample_.input.previous,
                                                               sample_.input.reference}
                                               : stages_[level - 1];
            for (std::size_t i = level; i < 4; ++i) {
                x = net_.backbone().forward_stage(i, x);
                fused[i] = dec.fuse_stage(x, i, h_ / 4, w_ / 4);
            }
        } else if (level < kFuseAll) {
            const std::size_t i = level - kFuse1;
            fused[i] = dec.fuse_stage(stages_[i], i, h_ / 4, w_ / 4);
        }
        const Tensor mixed = level <= kFuseAll ? pointwise(dec.fuse_all_layer(), concat(fused, 1)) : mixed_;
        const Tensor feats = level <= kConv ? dec.conv()(mixed) : features_;
        const MaskOutput m = dec.predict_mask(feats, h_, w_);
        const Tensor err = dec.predict_error(feats, mask_low_);
        const double bce = bce_with_logits(logit_difference(m.logits), sample_.gt).item();
        return bce + cfg_.gamma * mse(err, target_).item();
    }

private:
    const SrrNet& net_;
    const GradcheckSample& sample_;
    LossConfig cfg_;
    std::size_t h_, w_;
    PyramidFeatures stages_;
    std::array<Tensor, 4> fused_;
    Tensor mixed_, features_, mask_low_, target_;
};

}  // namespace

GradcheckSample random_gradcheck_sample(std::size_t size, std::uint64_t seed) {
    Rng rng(seed);
    auto image = [&](std::size_t channels, bool with_mask) {
        const std::size_t plane = size * size;
        std::vector<double> v(channels * plane);
        for (std::size_t i = 0; i < v.size(); ++i) {
            const bool mask_channel = with_mask && i >= (channels - 1) * plane;
            v[i] = mask_channel ? (rng.bernoulli(0.5) ? 1.0 : 0.0) : rng.uniform();
        }
        return Tensor::from_values({1, channels, size, size}, std::move(v));
    };
    GradcheckSample s;
    s.input.current = image(3, false);
    s.input.previous = image(4, true);
    s.input.reference = image(4, true);
    s.gt = image(1, true);
    s.input.validate();
    return s;
}

double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

GradcheckReport gradcheck_model(SrrNet& net, const GradcheckOptions& opts) {
    if (!(opts.step > 0.0) || !(opts.floor > 0.0)) throw ConfigError("gradcheck step and floor must be positive");
    const auto t0 = std::chrono::steady_clock::now();
    const GradcheckSample sample = random_gradcheck_sample(opts.size, opts.seed);

    ParameterStore& store = net.parameters();
    std::vector<std::vector<double>> saved;
    if (opts.jitter > 0.0) {
        Rng rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
        for (const Parameter& p : store.parameters()) {
            Tensor w = p.tensor;
            saved.emplace_back(w.values().begin(), w.values().end());
            for (double& v : w.mutable_values()) v += opts.jitter * rng.normal();
        }
    }
    store.zero_grad();
    {
        const PredictionPair pred = net.forward(sample.input);
        const LossTerms terms = compute_loss(pred, sample.gt, opts.loss);
        require_finite(terms.total, "gradcheck loss");
        terms.total.backward();
    }

    const FrozenLoss loss(net, sample, opts.loss);
    GradcheckReport report;
    report.tolerance = opts.tolerance;
    for (const Parameter& p : store.parameters()) {
        Tensor w = p.tensor;
        const std::vector<double> analytic(w.grad().begin(), w.grad().end());
        const std::size_t level = level_of(p.name);
        const std::size_t n = w.numel();
        const std::size_t count =
            opts.max_elements_per_tensor == 0 ? n : std::min(n, opts.max_elements_per_tensor);
        ParameterCheck check;
        check.name = p.name;
        auto values = w.mutable_values();
        for (std::size_t k = 0; k < count; ++k) {
            // evenly spread when subsampling
            const std::size_t j = count == n ? k : k * n / count;
            const double original = values[j];
            values[j] = original + opts.step;
            const double up = loss.evaluate(level);
            values[j] = original - opts.step;
            const double down = loss.evaluate(level);
            values[j] = original;
            const double numeric = (up - down) / (2.0 * opts.step);
            if (!std::isfinite(numeric)) throw NumericError("non-finite finite difference for " + p.name);
            const double rel = relative_error(analytic[j], numeric, opts.floor);
            if (rel > check.max_rel || check.checked == 0) {
                check.max_rel = rel;
                check.worst_index = j;
                check.analytic = analytic[j];
                check.numeric = numeric;
            }
            ++check.checked;
        }
        report.elements += check.checked;
        if (check.max_rel > report.max_rel || report.parameters.empty()) {
            report.max_rel = check.max_rel;
            report.worst = p.name;
        }
        report.parameters.push_back(check);
        if (opts.progress) opts.progress(p.name, report.parameters.size(), store.parameters().size());
    }
    store.zero_grad();
    for (std::size_t i = 0; i < saved.size(); ++i) {
        Tensor w = store.parameters()[i].tensor;
        std::copy(saved[i].begin(), saved[i].end(), w.mutable_values().begin());
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace srr

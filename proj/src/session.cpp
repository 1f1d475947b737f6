#include "srr/session.hpp"

#include "srr/error.hpp"

namespace srr {

std::string_view to_string(ReferenceMode mode) {
    switch (mode) {
        case ReferenceMode::Off: return "off";
        case ReferenceMode::Random: return "random";
        case ReferenceMode::Scored: return "scored";
    }
    return "scored";
}

ReferenceMode parse_reference_mode(std::string_view text) {
    if (text == "off") return ReferenceMode::Off;
    if (text == "random") return ReferenceMode::Random;
    if (text == "scored") return ReferenceMode::Scored;
    throw ConfigError("unknown reference_mode '" + std::string(text) + "' (expected off|random|scored)");
}

PredictionPair NetPredictor::predict(const FrameTriplet& input) {
    NoGradGuard guard;
    return net_.forward(input);
}

PredictionPair ScriptedPredictor::predict(const FrameTriplet& input) {
    if (next_ >= scores_.size()) throw UsageError("scripted predictor ran out of scores");
    const double s = scores_[next_++];
    const std::size_t h = input.height(), w = input.width();
    PredictionPair out;
    out.mask_logits = Tensor::zeros({1, 2, h, w});
    out.mask_logits_low = Tensor::zeros({1, 2, h / 4, w / 4});
    out.mask = Tensor::zeros({1, 1, h, w});
    out.error = Tensor::full({1, 1, h / 4, w / 4}, s);
    out.scores = {s};
    return out;
}

Tensor with_mask(const Tensor& image, const Tensor& mask) {
    NoGradGuard guard;
    return concat({image, mask}, 1);
}

InferenceSession::InferenceSession(Predictor& predictor, ReferenceMode mode, std::uint64_t seed)
    : predictor_(predictor), mode_(mode), rng_(seed) {}

void InferenceSession::init(const Tensor& first_frame) {
    if (first_frame.rank() != 4 || first_frame.dim(0) != 1 || first_frame.dim(1) != 3) {
        throw DimensionError("session frames must be [1,3,H,W], got " + shape_str(first_frame.shape()));
    }
    const Tensor zero = Tensor::zeros({1, 1, first_frame.dim(2), first_frame.dim(3)});
    prev_image_ = first_frame;
    prev_mask_ = zero;
    memory_ = MemoryState{first_frame, zero, 1.0, 0};
    counter_ = 0;
    history_.clear();
}

StepResult InferenceSession::step(const Tensor& frame) {
    if (!prev_image_.defined()) throw UsageError("session step before init");
    if (frame.shape() != prev_image_.shape()) {
        throw ConfigError("frame " + std::to_string(counter_) + " has shape " + shape_str(frame.shape()) +
                          ", session expects " + shape_str(prev_image_.shape()));
    }
    StepResult res;
    res.frame_index = counter_;

    const Tensor p_in = with_mask(prev_image_, prev_mask_);
    Tensor r_in;
    switch (mode_) {
        case ReferenceMode::Off:
            r_in = p_in;
            res.reference_used = counter_ == 0 ? 0 : counter_ - 1;
            break;
        case ReferenceMode::Random:
            if (history_.empty()) {
                r_in = with_mask(memory_.image, memory_.mask);
                res.reference_used = 0;
            } else {
                const auto k = static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(history_.size())));
                r_in = with_mask(history_[k].first, history_[k].second);
                res.reference_used = k;
            }
            break;
        case ReferenceMode::Scored:
            r_in = with_mask(memory_.image, memory_.mask);
            res.reference_used = memory_.ref_frame_index;
            break;
    }

    const PredictionPair pred = predictor_.predict(FrameTriplet{frame, p_in, r_in});
    res.mask = pred.mask;
    res.error = pred.error;
    {
        NoGradGuard guard;
        res.probability = pred.foreground_probability();
    }
    res.score = pred.scores.at(0);

    if (res.score < memory_.score) {
        memory_.image = frame;
        memory_.mask = pred.mask;
        memory_.score = res.score;
        memory_.ref_frame_index = counter_;
        res.updated = true;
    }
    res.ref_frame_index = memory_.ref_frame_index;
    prev_image_ = frame;
    prev_mask_ = pred.mask;
    if (mode_ == ReferenceMode::Random) history_.emplace_back(frame, pred.mask);
    ++counter_;
    return res;
}

}  // namespace srr

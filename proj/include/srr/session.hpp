#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "srr/model.hpp"
#include "srr/rng.hpp"

namespace srr {

/// How the reference branch input is chosen during inference.
enum class ReferenceMode {
    Off,     // R input duplicates the P input
    Random,  // R drawn uniformly from already processed frames
    Scored,  // R is the frame with the best predicted score so far
};

std::string_view to_string(ReferenceMode mode);
ReferenceMode parse_reference_mode(std::string_view text);

/// Stored reference frame, its predicted mask, and the best score seen.
struct MemoryState {
    Tensor image;  // [1,3,H,W]
    Tensor mask;   // [1,1,H,W]
    double score = 1.0;
    std::size_t ref_frame_index = 0;
};

/// Maps a triplet to a prediction. The network is one implementation; tests
/// substitute scripted ones.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual PredictionPair predict(const FrameTriplet& input) = 0;
};

/// Runs an SrrNet without recording a gradient tape.
class NetPredictor : public Predictor {
public:
    explicit NetPredictor(const SrrNet& net) : net_(net) {}
    PredictionPair predict(const FrameTriplet& input) override;

private:
    const SrrNet& net_;
};

/// Returns the given scores in order with an all-background mask and a
/// constant error map equal to the score.
class ScriptedPredictor : public Predictor {
public:
    explicit ScriptedPredictor(std::vector<double> scores) : scores_(std::move(scores)) {}
    PredictionPair predict(const FrameTriplet& input) override;
    std::size_t calls() const { return next_; }

private:
    std::vector<double> scores_;
    std::size_t next_ = 0;
};

struct StepResult {
    std::size_t frame_index = 0;
    Tensor mask;         // O_msk, [1,1,H,W]
    Tensor error;        // O_err, [1,1,H/4,W/4]
    Tensor probability;  // foreground probability, [1,1,H,W]
    double score = 0.0;
    bool updated = false;
    std::size_t ref_frame_index = 0;  // memory reference after this step
    std::size_t reference_used = 0;   // frame whose image fed the R branch
};

/// Single-pass inference state: previous-frame carryover plus the
/// score-driven reference memory.
class InferenceSession {
public:
    InferenceSession(Predictor& predictor, ReferenceMode mode = ReferenceMode::Scored, std::uint64_t seed = 0);

    /// P = R = `first_frame` with all-zero masks, S = 1.
    void init(const Tensor& first_frame);
    /// Processes the next frame in order.
    StepResult step(const Tensor& frame);

    bool initialized() const { return counter_ > 0 || prev_image_.defined(); }
    const MemoryState& memory() const { return memory_; }
    const Tensor& previous_image() const { return prev_image_; }
    const Tensor& previous_mask() const { return prev_mask_; }
    std::size_t frame_counter() const { return counter_; }

private:
    Predictor& predictor_;
    ReferenceMode mode_;
    Rng rng_;
    MemoryState memory_;
    Tensor prev_image_, prev_mask_;
    std::size_t counter_ = 0;
    std::vector<std::pair<Tensor, Tensor>> history_;  // processed (image, mask), random mode only
};

/// [1,C,H,W] image with a [1,1,H,W] mask appended as the last channel.
Tensor with_mask(const Tensor& image, const Tensor& mask);

}  // namespace srr

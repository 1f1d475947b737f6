#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "srr/dataset.hpp"
#include "srr/session.hpp"

namespace srr {

/// Random access to an ordered frame sequence. Implementations may count or
/// police requests; inference only ever asks for the next frame in order.
class FrameSource {
public:
    virtual ~FrameSource() = default;
    virtual std::size_t size() const = 0;
    virtual Tensor frame(std::size_t index) = 0;
};

class SequenceFrameSource : public FrameSource {
public:
    explicit SequenceFrameSource(const Sequence& seq) : seq_(seq) {}
    std::size_t size() const override { return seq_.size(); }
    Tensor frame(std::size_t index) override { return seq_.frames.at(index); }

private:
    const Sequence& seq_;
};

/// Reads NNNNN.ppm lazily from a sequence directory.
class DirectoryFrameSource : public FrameSource {
public:
    explicit DirectoryFrameSource(std::filesystem::path dir);
    std::size_t size() const override { return count_; }
    Tensor frame(std::size_t index) override;

private:
    std::filesystem::path dir_;
    std::size_t count_ = 0;
};

struct InferOptions {
    ReferenceMode reference_mode = ReferenceMode::Scored;
    std::uint64_t seed = 0;
};

/// init on frame 0, then one step per frame in order. `sink` sees each result
/// as soon as its step completes.
std::vector<StepResult> infer_sequence(FrameSource& frames, Predictor& predictor, const InferOptions& opts,
                                       const std::function<void(const StepResult&)>& sink = {});

/// Mean absolute difference between a binary mask and its ground truth.
double mask_mae(const Tensor& mask, const Tensor& gt);

struct ScoreRow {
    std::size_t frame_index = 0;
    double score = 0.0;
    std::optional<double> true_mae;
    bool updated = false;
    std::size_t ref_frame_index = 0;
};

/// `gt` may be empty; otherwise it holds one mask per result.
std::vector<ScoreRow> score_trace(const std::vector<StepResult>& results, const std::vector<Tensor>& gt = {});
/// Columns frame_index,score,true_mae,updated,ref_frame_index; true_mae is
/// left empty when unknown.
void write_score_csv(const std::filesystem::path& path, const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> read_score_csv(const std::filesystem::path& path);

}  // namespace srr

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "srr/metrics.hpp"

namespace srr {

struct FrameMetrics {
    std::string sequence;
    std::size_t frame = 0;
    double s_alpha = 0.0;
    std::optional<double> f_w;  // absent when the ground truth is empty
    double mae = 0.0;
    double dice = 0.0;
    double iou = 0.0;
};

struct MetricSummary {
    double s_alpha = 0.0;
    double f_w = 0.0;
    double mae = 0.0;
    double mdice = 0.0;
    double miou = 0.0;
    std::size_t frames = 0;
    std::size_t f_skipped = 0;  // frames without foreground, left out of f_w
};

struct SequenceReport {
    std::string name;
    MetricSummary summary;
};

struct MetricReport {
    std::vector<FrameMetrics> frames;
    std::vector<SequenceReport> sequences;
    MetricSummary macro;  // mean over per-sequence means
    MetricSummary flat;   // mean over all frames
    std::vector<std::string> missing;
};

/// `soft` feeds S-measure and weighted F; `binary` feeds MAE, Dice and IoU.
FrameMetrics evaluate_frame(const Grid& soft, const Grid& binary, const Grid& gt);

/// Means over frames (f_w over frames that have it).
MetricSummary summarize(const std::vector<FrameMetrics>& frames);
MetricSummary macro_average(const std::vector<SequenceReport>& sequences);

struct EvalOptions {
    bool allow_missing = false;
};

/// Prediction sequences hold mask/NNNNN.pgm (binary) and optionally
/// prob/NNNNN.pgm (soft), or plain NNNNN.pgm masks. Ground-truth sequences
/// hold NNNNN.pgm. Sequences are matched by directory name.
MetricReport evaluate_dataset(const std::filesystem::path& pred_root, const std::filesystem::path& gt_root,
                              const EvalOptions& opts = {});

void write_metrics_csv(const std::filesystem::path& path, const MetricReport& report);
/// Aligned text table of per-sequence and aggregate rows.
std::string format_report(const MetricReport& report, bool flat_primary = false);

}  // namespace srr

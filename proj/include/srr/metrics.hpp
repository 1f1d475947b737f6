#pragma once

#include <optional>
#include <vector>

#include "srr/tensor.hpp"

namespace srr {

/// Row-major single-channel map.
struct Grid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;

    Grid() = default;
    Grid(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), values(h * w, fill) {}
    Grid(std::size_t h, std::size_t w, std::vector<double> v);

    double& operator()(std::size_t r, std::size_t c) { return values[r * width + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values[r * width + c]; }
    std::size_t size() const { return values.size(); }

    /// From a [1,1,H,W] tensor.
    static Grid from_tensor(const Tensor& t);
};

/// Mean |pred - gt|.
double mae(const Grid& pred, const Grid& gt);
/// 2|A n B| / (|A| + |B|) on maps thresholded at 0.5; 1 when both are empty.
double dice(const Grid& pred, const Grid& gt);
/// |A n B| / |A u B| on maps thresholded at 0.5; 1 when both are empty.
double iou(const Grid& pred, const Grid& gt);

/// Structure measure alpha * S_object + (1 - alpha) * S_region for a soft
/// prediction in [0,1] against a binary ground truth.
double s_measure(const Grid& pred, const Grid& gt, double alpha = 0.5);

/// Weighted F-measure; nullopt when the ground truth has no foreground.
std::optional<double> weighted_fbeta(const Grid& pred, const Grid& gt, double beta2 = 1.0);

/// Exact Euclidean distance to the nearest nonzero pixel plus that pixel's
/// row-major index. Equidistant candidates resolve to the smallest
/// (row, col). Requires at least one nonzero pixel.
struct DistanceTransform {
    std::vector<double> distance;
    std::vector<std::size_t> nearest;
};
DistanceTransform distance_transform(const Grid& binary);

/// 7x7 normalized Gaussian with sigma 5.
std::vector<double> gaussian_kernel_7x7();

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);
std::vector<double> average_ranks(const std::vector<double>& v);

}  // namespace srr

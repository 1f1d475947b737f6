#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "srr/tensor.hpp"

namespace srr {

/// Ordered frames [1,3,H,W] with binary masks [1,1,H,W] (masks may be absent
/// for unlabeled sequences).
struct Sequence {
    std::string name;
    std::vector<Tensor> frames;
    std::vector<Tensor> masks;

    std::size_t size() const { return frames.size(); }
    bool labeled() const { return !frames.empty() && masks.size() == frames.size(); }
};

/// Images with masks and category labels for static pretraining.
struct StaticPool {
    std::vector<std::string> names;
    std::vector<std::string> categories;
    std::vector<Tensor> images;
    std::vector<Tensor> masks;

    std::size_t size() const { return images.size(); }
};

/// Zero-padded five-digit frame stem, e.g. 7 -> "00007".
std::string frame_stem(std::size_t index);

/// Frames NNNNN.ppm (numbered from 0 without gaps) and masks NNNNN.pgm.
Sequence load_sequence(const std::filesystem::path& dir, bool require_masks = true);
void save_sequence(const std::filesystem::path& dir, const Sequence& seq);
/// Every subdirectory of `root` that holds frames, in name order.
std::vector<Sequence> load_dataset(const std::filesystem::path& root, bool require_masks = true);
std::vector<std::filesystem::path> sequence_dirs(const std::filesystem::path& root);

/// Directory with <stem>.ppm / <stem>.pgm pairs and a categories.txt manifest
/// of "<stem> <category>" lines.
StaticPool load_static_pool(const std::filesystem::path& dir);
void save_static_pool(const std::filesystem::path& dir, const StaticPool& pool);

}  // namespace srr

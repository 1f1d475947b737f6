#pragma once

#include "srr/backbone.hpp"
#include "srr/dataset.hpp"
#include "srr/rng.hpp"

namespace srr {

struct TripletIndices {
    std::size_t c = 0, p = 0, r = 0;
};

/// One supervised sample: network input plus the current frame's ground truth.
struct TrainTriplet {
    FrameTriplet input;
    Tensor gt;  // [B,1,H,W]
    TripletIndices indices;
};

/// C uniform in [1, len), P = C - 1, R uniform in [0, C). A single frame
/// yields (0, 0, 0).
TripletIndices sample_video_indices(std::size_t length, Rng& rng);
/// C uniform; P uniform among other images of C's category (C itself when
/// alone); R uniform over the whole pool.
TripletIndices sample_static_indices(const std::vector<std::string>& categories, Rng& rng);

/// P and R carry ground-truth masks.
TrainTriplet sample_training_triplet(const Sequence& seq, Rng& rng);
TrainTriplet sample_static_triplet(const StaticPool& pool, Rng& rng);

struct AugmentConfig {
    bool hflip = true;      // mirror the whole triplet with probability 1/2
    std::size_t crop = 0;   // square crop extent shared by the triplet; 0 keeps full frames
};

TrainTriplet augment(const TrainTriplet& t, const AugmentConfig& cfg, Rng& rng);
/// Concatenates samples of equal extent along the batch axis.
TrainTriplet stack_triplets(const std::vector<TrainTriplet>& samples);

Tensor hflip_map(const Tensor& map);
Tensor crop_map(const Tensor& map, std::size_t top, std::size_t left, std::size_t height, std::size_t width);

}  // namespace srr

#pragma once

#include <cstdint>
#include <filesystem>

#include "srr/dataset.hpp"

namespace srr {

struct SynthParams {
    std::uint64_t seed = 1;             // motion, occlusions, sensor noise
    std::uint64_t appearance_seed = 0;  // palette and textures; 0 derives them from `seed`
    std::size_t frames = 16;
    std::size_t size = 64;
    double texture_grain = 8.0;     // lattice spacing of the value noise, px
    double contrast = 0.3;          // 0 = object statistics equal the background
    double contrast_variation = 0.0;  // per-frame relative swing of the contrast
    double motion_amplitude = 1.5;  // px / frame
    double occlusion_prob = 0.1;
    double min_radius = 6.0;
    double max_radius = 12.0;

    void validate() const;
};

/// Radial wobble of the object outline relative to its nominal radius.
inline constexpr double kOutlineWobble = 0.12;

/// Deterministic textured video with one moving, similarly textured object.
/// Pixel values are exact multiples of 1/255, so written files read back
/// to the same tensors.
Sequence synth_generate(const SynthParams& params, const std::string& name = "synth");

/// Category-labelled stills drawn from independent generator runs.
StaticPool synth_static_pool(const SynthParams& params, std::size_t images, std::size_t categories);

/// Bounds on the foreground pixel count of an unoccluded frame.
std::pair<double, double> synth_area_bounds(const SynthParams& params);

}  // namespace srr

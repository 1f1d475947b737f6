#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "srr/tensor.hpp"

namespace srr {

/// 8-bit interleaved raster.
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;  // 1 (PGM) or 3 (PPM)
    std::vector<std::uint8_t> pixels;
};

/// Parses binary P5/P6 data with maxval 255. Comments in the header are accepted.
Image decode_pnm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_pnm(const Image& image);

Image read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Image& image);

/// [1,C,H,W] tensor with values v / 255.
Tensor image_to_tensor(const Image& image);
/// Quantizes [1,C,H,W] values in [0,1] with floor(v * 255 + 0.5), clamped.
Image tensor_to_image(const Tensor& t);
std::uint8_t quantize_unit(double v);

/// Reads an RGB frame as [1,3,H,W].
Tensor read_frame(const std::filesystem::path& path);
/// Reads a mask as [1,1,H,W] binary (any nonzero byte is foreground).
Tensor read_mask(const std::filesystem::path& path);
/// Writes a binary mask as 0/255 PGM.
void write_mask(const std::filesystem::path& path, const Tensor& mask);
/// Writes values in [0,1] as a gray PGM (also used for probabilities).
void write_error_map(const std::filesystem::path& path, const Tensor& error);

}  // namespace srr

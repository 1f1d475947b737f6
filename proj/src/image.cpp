#include "srr/image.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "srr/error.hpp"

namespace srr {

namespace {

class HeaderReader {
public:
    explicit HeaderReader(const std::vector<std::uint8_t>& bytes) : b_(bytes) {}

    void skip_space_and_comments() {
        while (pos_ < b_.size()) {
            if (std::isspace(b_[pos_])) {
                ++pos_;
            } else if (b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::size_t number(const char* what) {
        skip_space_and_comments();
        if (pos_ >= b_.size() || !std::isdigit(b_[pos_])) throw ParseError(std::string("expected ") + what, pos_);
        std::size_t v = 0;
        while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
            v = v * 10 + static_cast<std::size_t>(b_[pos_] - '0');
            if (v > (1u << 24)) throw ParseError(std::string(what) + " too large", pos_);
            ++pos_;
        }
        return v;
    }

    std::size_t pos_ = 0;

private:
    const std::vector<std::uint8_t>& b_;
};

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Image decode_pnm(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw ParseError("bad magic number, expected P5 or P6", 0);
    }
    Image img;
    img.channels = bytes[1] == '6' ? 3 : 1;
    HeaderReader r(bytes);
    r.pos_ = 2;
    img.width = r.number("width");
    img.height = r.number("height");
    const std::size_t maxval = r.number("maxval");
    if (maxval != 255) throw ParseError("only maxval 255 is supported, got " + std::to_string(maxval), r.pos_);
    if (img.width == 0 || img.height == 0) throw ParseError("zero image extent", r.pos_);
    if (r.pos_ >= bytes.size() || !std::isspace(bytes[r.pos_])) throw ParseError("missing header terminator", r.pos_);
    ++r.pos_;
    const std::size_t n = img.width * img.height * img.channels;
    if (bytes.size() - r.pos_ < n) {
        throw ParseError("truncated payload: need " + std::to_string(n) + " bytes, have " +
                             std::to_string(bytes.size() - r.pos_),
                         bytes.size());
    }
    img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos_),
                      bytes.begin() + static_cast<std::ptrdiff_t>(r.pos_ + n));
    return img;
}

std::vector<std::uint8_t> encode_pnm(const Image& image) {
    if (image.channels != 1 && image.channels != 3) throw UsageError("PNM images have 1 or 3 channels");
    if (image.pixels.size() != image.width * image.height * image.channels) throw UsageError("pixel buffer size mismatch");
    const std::string header = std::string(image.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(image.width) +
                               " " + std::to_string(image.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), image.pixels.begin(), image.pixels.end());
    return out;
}

Image read_pnm(const std::filesystem::path& path) {
    try {
        return decode_pnm(read_bytes(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.offset());
    }
}

void write_pnm(const std::filesystem::path& path, const Image& image) {
    const auto bytes = encode_pnm(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

std::uint8_t quantize_unit(double v) {
    const double q = std::floor(v * 255.0 + 0.5);
    if (!(q > 0.0)) return 0;
    if (q >= 255.0) return 255;
    return static_cast<std::uint8_t>(q);
}

Tensor image_to_tensor(const Image& image) {
    const std::size_t c = image.channels, plane = image.width * image.height;
    std::vector<double> v(c * plane);
    for (std::size_t i = 0; i < plane; ++i)
        for (std::size_t k = 0; k < c; ++k) v[k * plane + i] = image.pixels[i * c + k] / 255.0;
    return Tensor::from_values({1, c, image.height, image.width}, std::move(v));
}

Image tensor_to_image(const Tensor& t) {
    if (t.rank() != 4 || t.dim(0) != 1 || (t.dim(1) != 1 && t.dim(1) != 3)) {
        throw DimensionError("image tensors must be [1,1|3,H,W], got " + shape_str(t.shape()));
    }
    Image img{t.dim(3), t.dim(2), t.dim(1), {}};
    const std::size_t plane = img.width * img.height;
    const auto v = t.values();
    img.pixels.resize(plane * img.channels);
    for (std::size_t i = 0; i < plane; ++i)
        for (std::size_t k = 0; k < img.channels; ++k) img.pixels[i * img.channels + k] = quantize_unit(v[k * plane + i]);
    return img;
}

Tensor read_frame(const std::filesystem::path& path) {
    const Image img = read_pnm(path);
    if (img.channels != 3) throw ConfigError(path.string() + ": expected an RGB (P6) frame");
    return image_to_tensor(img);
}

Tensor read_mask(const std::filesystem::path& path) {
    Image img = read_pnm(path);
    if (img.channels != 1) throw ConfigError(path.string() + ": expected a gray (P5) mask");
    for (auto& p : img.pixels) p = p ? 255 : 0;
    return image_to_tensor(img);
}

void write_mask(const std::filesystem::path& path, const Tensor& mask) {
    if (mask.rank() != 4 || mask.dim(1) != 1) throw DimensionError("masks must be [1,1,H,W]");
    Image img = tensor_to_image(mask);
    for (auto& p : img.pixels) p = p >= 128 ? 255 : 0;
    write_pnm(path, img);
}

void write_error_map(const std::filesystem::path& path, const Tensor& error) {
    if (error.rank() != 4 || error.dim(1) != 1) throw DimensionError("error maps must be [1,1,h,w]");
    write_pnm(path, tensor_to_image(error));
}

}  // namespace srr

#include "srr/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "srr/error.hpp"
#include "srr/rng.hpp"

namespace srr {

namespace {

constexpr double kPi = std::numbers::pi;

// Smoothly interpolated lattice noise in [0,1], periodic over `period` cells.
class ValueNoise {
public:
    ValueNoise(Rng& rng, std::size_t period) : period_(period), lattice_(period * period) {
        for (double& v : lattice_) v = rng.uniform();
    }

    double operator()(double x, double y) const {
        const double fx = std::floor(x), fy = std::floor(y);
        const double tx = smooth(x - fx), ty = smooth(y - fy);
        const std::size_t x0 = wrap(fx), y0 = wrap(fy), x1 = (x0 + 1) % period_, y1 = (y0 + 1) % period_;
        const double a = at(x0, y0) + tx * (at(x1, y0) - at(x0, y0));
        const double b = at(x0, y1) + tx * (at(x1, y1) - at(x0, y1));
        return a + ty * (b - a);
    }

private:
    static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }
    std::size_t wrap(double v) const {
        const auto p = static_cast<long long>(period_);
        return static_cast<std::size_t>(((static_cast<long long>(v) % p) + p) % p);
    }
    double at(std::size_t x, std::size_t y) const { return lattice_[y * period_ + x]; }

    std::size_t period_;
    std::vector<double> lattice_;
};

struct Texture {
    ValueNoise coarse, fine, tint;
    std::array<double, 3> base;
    std::array<double, 3> spread;

    Texture(Rng& rng, const std::array<double, 3>& base_colour)
        : coarse(rng, 64), fine(rng, 64), tint(rng, 64), base(base_colour) {
        for (double& s : spread) s = rng.uniform(0.15, 0.3);
    }

    double value(std::size_t ch, double x, double y, double grain) const {
        const double n = 0.65 * coarse(x / grain, y / grain) + 0.35 * fine(2.0 * x / grain, 2.0 * y / grain);
        const double t = tint(x / grain + 17.0 * static_cast<double>(ch), y / grain);
        return base[ch] + spread[ch] * (n - 0.5) * 2.0 + 0.05 * (t - 0.5);
    }
};

double quantized(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return std::floor(c * 255.0 + 0.5) / 255.0;
}

}  // namespace

void SynthParams::validate() const {
    if (frames == 0) throw ConfigError("synth needs at least one frame");
    if (size == 0 || size % 32 != 0) throw ConfigError("synth size must be a positive multiple of 32");
    if (!(contrast >= 0.0 && contrast <= 1.0)) throw ConfigError("contrast must lie in [0,1]");
    if (!(contrast_variation >= 0.0 && contrast_variation <= 1.0)) throw ConfigError("contrast_variation must lie in [0,1]");
    if (!(occlusion_prob >= 0.0 && occlusion_prob <= 1.0)) throw ConfigError("occlusion_prob must lie in [0,1]");
    if (!(texture_grain > 0.0)) throw ConfigError("texture_grain must be positive");
    if (!(motion_amplitude >= 0.0)) throw ConfigError("motion_amplitude must be >= 0");
    if (!(min_radius > 0.0 && max_radius >= min_radius)) throw ConfigError("need 0 < min_radius <= max_radius");
    if (2.0 * max_radius * (1.0 + kOutlineWobble) + 2.0 >= static_cast<double>(size)) {
        throw ConfigError("max_radius too large for the frame size");
    }
}

std::pair<double, double> synth_area_bounds(const SynthParams& p) {
    const double lo = p.min_radius * (1.0 - kOutlineWobble) - 1.0;
    const double hi = p.max_radius * (1.0 + kOutlineWobble) + 1.0;
    return {kPi * std::max(lo, 0.0) * std::max(lo, 0.0), kPi * hi * hi};
}

Sequence synth_generate(const SynthParams& p, const std::string& name) {
    p.validate();
    Rng look(p.appearance_seed != 0 ? p.appearance_seed : p.seed);
    Rng rng(p.seed ^ 0x5DEECE66DULL);
    std::array<double, 3> bg_base;
    for (double& c : bg_base) c = look.uniform(0.3, 0.7);
    const Texture background(look, bg_base);
    // object colour offset: random direction, length 0.6 at full contrast
    std::array<double, 3> delta;
    double norm = 0.0;
    for (double& d : delta) {
        d = look.normal();
        norm += d * d;
    }
    norm = std::sqrt(norm);
    for (double& d : delta) d = 0.6 * d / norm;
    const Texture object(look, bg_base);

    const double n = static_cast<double>(p.size);
    const double margin = p.max_radius * (1.0 + kOutlineWobble) + 1.0;
    double cx = rng.uniform(margin, n - margin), cy = rng.uniform(margin, n - margin);
    const double heading = rng.uniform(0.0, 2.0 * kPi);
    double vx = p.motion_amplitude * std::cos(heading), vy = p.motion_amplitude * std::sin(heading);
    const double radius_phase = rng.uniform(0.0, 2.0 * kPi);
    const double radius_period = rng.uniform(8.0, 16.0);
    const double contrast_phase = rng.uniform(0.0, 2.0 * kPi);
    const double wobble_phase = rng.uniform(0.0, 2.0 * kPi);
    const double drift_x = rng.uniform(-0.5, 0.5), drift_y = rng.uniform(-0.5, 0.5);

    Sequence seq;
    seq.name = name;
    const std::size_t plane = p.size * p.size;
    for (std::size_t t = 0; t < p.frames; ++t) {
        const double ft = static_cast<double>(t);
        const double radius = p.min_radius + (p.max_radius - p.min_radius) *
                                                 (0.5 + 0.5 * std::sin(2.0 * kPi * ft / radius_period + radius_phase));
        const double contrast =
            std::clamp(p.contrast * (1.0 + p.contrast_variation * std::sin(2.0 * kPi * ft / 7.0 + contrast_phase)), 0.0,
                       1.0);
        // occluder: a background-textured bar across the object
        const bool occluded = rng.bernoulli(p.occlusion_prob);
        const bool vertical = rng.bernoulli(0.5);
        const double bar_centre = rng.uniform(-0.5, 0.5) * radius;
        const double bar_half = rng.uniform(0.25, 0.5) * radius;

        std::vector<double> frame(3 * plane);
        std::vector<double> mask(plane, 0.0);
        const double ox = drift_x * ft, oy = drift_y * ft;
        for (std::size_t y = 0; y < p.size; ++y)
            for (std::size_t x = 0; x < p.size; ++x) {
                const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
                const double dx = px - cx, dy = py - cy;
                const double edge = radius * (1.0 + kOutlineWobble * std::sin(3.0 * std::atan2(dy, dx) + wobble_phase));
                bool inside = dx * dx + dy * dy <= edge * edge;
                if (inside && occluded) {
                    const double along = vertical ? dx : dy;
                    if (std::abs(along - bar_centre) <= bar_half) inside = false;
                }
                const std::size_t i = y * p.size + x;
                mask[i] = inside ? 1.0 : 0.0;
                for (std::size_t ch = 0; ch < 3; ++ch) {
                    double v = inside ? object.value(ch, dx + 101.0, dy + 101.0, p.texture_grain) + contrast * delta[ch]
                                      : background.value(ch, px + ox, py + oy, p.texture_grain);
                    v += 0.01 * rng.normal();
                    frame[ch * plane + i] = quantized(v);
                }
            }
        seq.frames.push_back(Tensor::from_values({1, 3, p.size, p.size}, std::move(frame)));
        seq.masks.push_back(Tensor::from_values({1, 1, p.size, p.size}, std::move(mask)));

        // advance the object, reflecting off the margins, with a little heading noise
        const double turn = rng.normal(0.0, 0.15);
        const double c = std::cos(turn), s = std::sin(turn);
        const double nvx = c * vx - s * vy, nvy = s * vx + c * vy;
        vx = nvx;
        vy = nvy;
        cx += vx;
        cy += vy;
        if (cx < margin || cx > n - margin) {
            vx = -vx;
            cx = std::clamp(cx, margin, n - margin);
        }
        if (cy < margin || cy > n - margin) {
            vy = -vy;
            cy = std::clamp(cy, margin, n - margin);
        }
    }
    return seq;
}

StaticPool synth_static_pool(const SynthParams& params, std::size_t images, std::size_t categories) {
    if (images == 0 || categories == 0) throw ConfigError("static pool needs images and categories");
    StaticPool pool;
    for (std::size_t i = 0; i < images; ++i) {
        SynthParams p = params;
        p.frames = 1;
        p.seed = params.seed * 1000003 + i;
        const Sequence s = synth_generate(p);
        pool.names.push_back("img" + frame_stem(i));
        pool.categories.push_back("cat" + std::to_string(i % categories));
        pool.images.push_back(s.frames[0]);
        pool.masks.push_back(s.masks[0]);
    }
    return pool;
}

}  // namespace srr

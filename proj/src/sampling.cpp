#include "srr/sampling.hpp"

#include "srr/error.hpp"
#include "srr/ops.hpp"
#include "srr/session.hpp"

namespace srr {

namespace {

std::size_t draw(Rng& rng, std::size_t lo, std::size_t hi) {
    return static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
}

}  // namespace

TripletIndices sample_video_indices(std::size_t length, Rng& rng) {
    if (length == 0) throw ConfigError("cannot sample from an empty sequence");
    if (length == 1) return {0, 0, 0};
    TripletIndices t;
    t.c = draw(rng, 1, length);
    t.p = t.c - 1;
    t.r = draw(rng, 0, t.c);
    return t;
}

TripletIndices sample_static_indices(const std::vector<std::string>& categories, Rng& rng) {
    if (categories.empty()) throw ConfigError("cannot sample from an empty image pool");
    TripletIndices t;
    t.c = draw(rng, 0, categories.size());
    std::vector<std::size_t> peers;
    for (std::size_t i = 0; i < categories.size(); ++i)
        if (i != t.c && categories[i] == categories[t.c]) peers.push_back(i);
    t.p = peers.empty() ? t.c : peers[draw(rng, 0, peers.size())];
    t.r = draw(rng, 0, categories.size());
    return t;
}

TrainTriplet sample_training_triplet(const Sequence& seq, Rng& rng) {
    if (!seq.labeled()) throw ConfigError("sequence '" + seq.name + "' has no ground-truth masks");
    TrainTriplet t;
    t.indices = sample_video_indices(seq.size(), rng);
    t.input.current = seq.frames[t.indices.c];
    t.input.previous = with_mask(seq.frames[t.indices.p], seq.masks[t.indices.p]);
    t.input.reference = with_mask(seq.frames[t.indices.r], seq.masks[t.indices.r]);
    t.gt = seq.masks[t.indices.c];
    return t;
}

TrainTriplet sample_static_triplet(const StaticPool& pool, Rng& rng) {
    TrainTriplet t;
    t.indices = sample_static_indices(pool.categories, rng);
    t.input.current = pool.images[t.indices.c];
    t.input.previous = with_mask(pool.images[t.indices.p], pool.masks[t.indices.p]);
    t.input.reference = with_mask(pool.images[t.indices.r], pool.masks[t.indices.r]);
    t.gt = pool.masks[t.indices.c];
    return t;
}

Tensor hflip_map(const Tensor& map) {
    if (map.rank() != 4) throw DimensionError("hflip expects [B,C,H,W]");
    const std::size_t rows = map.dim(0) * map.dim(1) * map.dim(2), w = map.dim(3);
    const auto v = map.values();
    std::vector<double> out(v.size());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t x = 0; x < w; ++x) out[r * w + x] = v[r * w + (w - 1 - x)];
    return Tensor::from_values(map.shape(), std::move(out));
}

Tensor crop_map(const Tensor& map, std::size_t top, std::size_t left, std::size_t height, std::size_t width) {
    if (map.rank() != 4 || top + height > map.dim(2) || left + width > map.dim(3)) {
        throw DimensionError("crop outside " + shape_str(map.shape()));
    }
    const std::size_t planes = map.dim(0) * map.dim(1), h = map.dim(2), w = map.dim(3);
    const auto v = map.values();
    std::vector<double> out(planes * height * width);
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x)
                out[(p * height + y) * width + x] = v[(p * h + top + y) * w + left + x];
    return Tensor::from_values({map.dim(0), map.dim(1), height, width}, std::move(out));
}

TrainTriplet augment(const TrainTriplet& t, const AugmentConfig& cfg, Rng& rng) {
    TrainTriplet out = t;
    std::array<Tensor*, 4> maps{&out.input.current, &out.input.previous, &out.input.reference, &out.gt};
    if (cfg.crop > 0) {
        const std::size_t h = t.input.height(), w = t.input.width();
        if (cfg.crop % 32 != 0 || cfg.crop > h || cfg.crop > w) {
            throw ConfigError("crop must be a multiple of 32 no larger than the frame");
        }
        const std::size_t top = draw(rng, 0, h - cfg.crop + 1), left = draw(rng, 0, w - cfg.crop + 1);
        for (Tensor* m : maps) *m = crop_map(*m, top, left, cfg.crop, cfg.crop);
    }
    if (cfg.hflip && rng.bernoulli(0.5))
        for (Tensor* m : maps) *m = hflip_map(*m);
    return out;
}

TrainTriplet stack_triplets(const std::vector<TrainTriplet>& samples) {
    if (samples.empty()) throw UsageError("empty batch");
    if (samples.size() == 1) return samples[0];
    NoGradGuard guard;
    std::vector<Tensor> c, p, r, g;
    for (const auto& s : samples) {
        c.push_back(s.input.current);
        p.push_back(s.input.previous);
        r.push_back(s.input.reference);
        g.push_back(s.gt);
    }
    TrainTriplet out;
    out.input = {concat(c, 0), concat(p, 0), concat(r, 0)};
    out.gt = concat(g, 0);
    out.indices = samples[0].indices;
    return out;
}

}  // namespace srr

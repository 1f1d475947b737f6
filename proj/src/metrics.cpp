#include "srr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "srr/error.hpp"

namespace srr {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_same(const Grid& a, const Grid& b) {
    if (a.height != b.height || a.width != b.width) {
        throw DimensionError("metric maps disagree: " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                             " vs " + std::to_string(b.height) + "x" + std::to_string(b.width));
    }
    if (a.values.empty()) throw DimensionError("metric on an empty map");
}

struct Overlap {
    double a = 0, b = 0, both = 0;
};

Overlap overlap(const Grid& pred, const Grid& gt) {
    require_same(pred, gt);
    Overlap o;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred.values[i] >= 0.5, g = gt.values[i] >= 0.5;
        o.a += p;
        o.b += g;
        o.both += p && g;
    }
    return o;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Similarity of a foreground-restricted prediction: 2x / (x^2 + 1 + sigma).
double object_score(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    const double x = mean_of(values);
    double var = 0.0;
    for (double v : values) var += (v - x) * (v - x);
    const double sigma = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
    return 2.0 * x / (x * x + 1.0 + sigma + kEps);
}

double s_object(const Grid& pred, const Grid& gt) {
    std::vector<double> fg, bg;
    double u = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt.values[i] >= 0.5) {
            fg.push_back(pred.values[i]);
            u += 1.0;
        } else {
            bg.push_back(1.0 - pred.values[i]);
        }
    }
    u /= static_cast<double>(gt.size());
    return u * object_score(fg) + (1.0 - u) * object_score(bg);
}

double ssim_block(const Grid& pred, const Grid& gt, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
    const double n = static_cast<double>((r1 - r0) * (c1 - c0));
    if (n == 0.0) return 0.0;
    double x = 0.0, y = 0.0;
    for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) {
            x += pred(r, c);
            y += gt(r, c);
        }
    x /= n;
    y /= n;
    double sx = 0.0, sy = 0.0, sxy = 0.0;
    for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) {
            const double dx = pred(r, c) - x, dy = gt(r, c) - y;
            sx += dx * dx;
            sy += dy * dy;
            sxy += dx * dy;
        }
    const double denom = n - 1.0 + kEps;
    sx /= denom;
    sy /= denom;
    sxy /= denom;
    const double a = 4.0 * x * y * sxy;
    const double b = (x * x + y * y) * (sx + sy);
    if (a != 0.0) return a / (b + kEps);
    if (b == 0.0) return 1.0;
    return 0.0;
}

double s_region(const Grid& pred, const Grid& gt) {
    const std::size_t h = gt.height, w = gt.width;
    double total = 0.0, sx = 0.0, sy = 0.0;
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            const double g = gt(r, c) >= 0.5 ? 1.0 : 0.0;
            total += g;
            sx += g * static_cast<double>(c + 1);
            sy += g * static_cast<double>(r + 1);
        }
    // 1-based split coordinates, rounded half away from zero
    const auto X = static_cast<std::size_t>(std::round(total == 0.0 ? w / 2.0 : sx / total));
    const auto Y = static_cast<std::size_t>(std::round(total == 0.0 ? h / 2.0 : sy / total));
    const double area = static_cast<double>(h * w);
    const double w1 = static_cast<double>(X * Y) / area;
    const double w2 = static_cast<double>((w - X) * Y) / area;
    const double w3 = static_cast<double>(X * (h - Y)) / area;
    const double w4 = 1.0 - w1 - w2 - w3;
    return w1 * ssim_block(pred, gt, 0, Y, 0, X) + w2 * ssim_block(pred, gt, 0, Y, X, w) +
           w3 * ssim_block(pred, gt, Y, h, 0, X) + w4 * ssim_block(pred, gt, Y, h, X, w);
}

}  // namespace

Grid::Grid(std::size_t h, std::size_t w, std::vector<double> v) : height(h), width(w), values(std::move(v)) {
    if (values.size() != h * w) throw DimensionError("grid value count does not match its extent");
}

Grid Grid::from_tensor(const Tensor& t) {
    if (t.rank() != 4 || t.dim(0) != 1 || t.dim(1) != 1) throw DimensionError("expected a [1,1,H,W] map");
    return Grid(t.dim(2), t.dim(3), std::vector<double>(t.values().begin(), t.values().end()));
}

double mae(const Grid& pred, const Grid& gt) {
    require_same(pred, gt);
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) total += std::abs(pred.values[i] - gt.values[i]);
    return total / static_cast<double>(pred.size());
}

double dice(const Grid& pred, const Grid& gt) {
    const Overlap o = overlap(pred, gt);
    if (o.a + o.b == 0.0) return 1.0;
    return 2.0 * o.both / (o.a + o.b);
}

double iou(const Grid& pred, const Grid& gt) {
    const Overlap o = overlap(pred, gt);
    const double uni = o.a + o.b - o.both;
    if (uni == 0.0) return 1.0;
    return o.both / uni;
}

double s_measure(const Grid& pred, const Grid& gt, double alpha) {
    require_same(pred, gt);
    double y = 0.0;
    for (double g : gt.values) y += g >= 0.5 ? 1.0 : 0.0;
    y /= static_cast<double>(gt.size());
    if (y == 0.0) return 1.0 - mean_of(pred.values);
    if (y == 1.0) return mean_of(pred.values);
    const double q = alpha * s_object(pred, gt) + (1.0 - alpha) * s_region(pred, gt);
    return std::max(q, 0.0);
}

DistanceTransform distance_transform(const Grid& binary) {
    const std::size_t h = binary.height, w = binary.width;
    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    // per column: vertical distance to the nearest set pixel and its row
    std::vector<std::size_t> gap(h * w, kNone), row_of(h * w, kNone);
    for (std::size_t c = 0; c < w; ++c) {
        std::vector<std::size_t> up(h, kNone), down(h, kNone);
        std::size_t last = kNone;
        for (std::size_t r = 0; r < h; ++r) {
            if (binary(r, c) != 0.0) last = r;
            if (last != kNone) up[r] = r - last;
        }
        last = kNone;
        for (std::size_t r = h; r-- > 0;) {
            if (binary(r, c) != 0.0) last = r;
            if (last != kNone) down[r] = last - r;
        }
        for (std::size_t r = 0; r < h; ++r) {
            if (up[r] == kNone && down[r] == kNone) continue;
            const bool take_up = up[r] != kNone && (down[r] == kNone || up[r] <= down[r]);
            gap[r * w + c] = take_up ? up[r] : down[r];
            row_of[r * w + c] = take_up ? r - up[r] : r + down[r];
        }
    }
    DistanceTransform dt;
    dt.distance.assign(h * w, 0.0);
    dt.nearest.assign(h * w, kNone);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            std::size_t best = kNone, best_row = kNone, best_col = kNone;
            for (std::size_t k = 0; k < w; ++k) {
                const std::size_t g = gap[r * w + k];
                if (g == kNone) continue;
                const std::size_t dc = c > k ? c - k : k - c;
                const std::size_t d2 = dc * dc + g * g;
                const std::size_t rr = row_of[r * w + k];
                if (d2 < best || (d2 == best && (rr < best_row || (rr == best_row && k < best_col)))) {
                    best = d2;
                    best_row = rr;
                    best_col = k;
                }
            }
            if (best == kNone) throw UsageError("distance transform of a map with no set pixels");
            dt.distance[r * w + c] = std::sqrt(static_cast<double>(best));
            dt.nearest[r * w + c] = best_row * w + best_col;
        }
    return dt;
}

std::vector<double> gaussian_kernel_7x7() {
    constexpr double sigma = 5.0;
    std::vector<double> k(49);
    double peak = 0.0;
    for (int y = -3; y <= 3; ++y)
        for (int x = -3; x <= 3; ++x) {
            const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
            k[static_cast<std::size_t>((y + 3) * 7 + x + 3)] = v;
            peak = std::max(peak, v);
        }
    for (double& v : k)
        if (v < kEps * peak) v = 0.0;
    const double total = std::accumulate(k.begin(), k.end(), 0.0);
    for (double& v : k) v /= total;
    return k;
}

std::optional<double> weighted_fbeta(const Grid& pred, const Grid& gt, double beta2) {
    require_same(pred, gt);
    const std::size_t h = gt.height, w = gt.width, n = gt.size();
    Grid g(h, w);
    double fg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        g.values[i] = gt.values[i] >= 0.5 ? 1.0 : 0.0;
        fg += g.values[i];
    }
    if (fg == 0.0) return std::nullopt;

    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) e[i] = std::abs(pred.values[i] - g.values[i]);
    const DistanceTransform dt = distance_transform(g);

    // background pixels borrow the error of their nearest foreground pixel
    std::vector<double> et = e;
    for (std::size_t i = 0; i < n; ++i)
        if (g.values[i] == 0.0) et[i] = e[dt.nearest[i]];

    const std::vector<double> k = gaussian_kernel_7x7();
    std::vector<double> ea(n, 0.0);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int dy = -3; dy <= 3; ++dy)
                for (int dx = -3; dx <= 3; ++dx) {
                    const auto rr = static_cast<long long>(r) + dy, cc = static_cast<long long>(c) + dx;
                    if (rr < 0 || cc < 0 || rr >= static_cast<long long>(h) || cc >= static_cast<long long>(w)) continue;
                    acc += k[static_cast<std::size_t>((dy + 3) * 7 + dx + 3)] *
                           et[static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc)];
                }
            ea[r * w + c] = acc;
        }

    double tp_loss = 0.0, fpw = 0.0;
    const double decay = std::log(0.5) / 5.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (g.values[i] != 0.0) {
            tp_loss += ea[i] < e[i] ? ea[i] : e[i];
        } else {
            fpw += e[i] * (2.0 - std::exp(decay * dt.distance[i]));
        }
    }
    const double tpw = fg - tp_loss;
    const double recall = 1.0 - tp_loss / fg;
    const double precision = tpw / (kEps + tpw + fpw);
    return (1.0 + beta2) * recall * precision / (kEps + recall + beta2 * precision);
}

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw DimensionError("spearman needs two equal-length series of >= 2");
    const std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
    const double mx = mean_of(rx), my = mean_of(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace srr

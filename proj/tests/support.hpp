#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

#include "srr/backbone.hpp"
#include "srr/ops.hpp"
#include "srr/rng.hpp"
#include "srr/tensor.hpp"

namespace srr::test {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = false) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor::from_values(shape, std::move(v), requires_grad);
}

inline Tensor random_mask(const Shape& shape, Rng& rng, double p = 0.5) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.bernoulli(p) ? 1.0 : 0.0;
    return Tensor::from_values(shape, std::move(v));
}

inline FrameTriplet random_triplet(std::size_t size, Rng& rng, std::size_t batch = 1) {
    FrameTriplet t;
    t.current = random_tensor({batch, 3, size, size}, rng, 0.0, 1.0);
    t.previous = random_tensor({batch, 4, size, size}, rng, 0.0, 1.0);
    t.reference = random_tensor({batch, 4, size, size}, rng, 0.0, 1.0);
    return t;
}

/// Largest relative deviation between the backward-pass gradient of `loss`
/// with respect to `x` and central differences.
inline double max_grad_error(Tensor x, const std::function<Tensor()>& loss, double h = 1e-6) {
    x.zero_grad();
    loss().backward();
    const std::vector<double> analytic(x.grad().begin(), x.grad().end());
    auto values = x.mutable_values();
    double worst = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double keep = values[i];
        double f[2];
        {
            NoGradGuard ng;
            values[i] = keep + h;
            f[0] = loss().item();
            values[i] = keep - h;
            f[1] = loss().item();
        }
        values[i] = keep;
        const double numeric = (f[0] - f[1]) / (2 * h);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

/// Weighted sum with fixed pseudo-random coefficients, so every output
/// element contributes a distinct gradient.
inline Tensor probe_sum(const Tensor& y, std::uint64_t seed = 99) {
    Rng rng(seed);
    return sum(y * random_tensor(y.shape(), rng));
}

inline bool bit_identical(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    const auto x = a.values(), y = b.values();
    return std::equal(x.begin(), x.end(), y.begin());
}

inline void perturb(Tensor& t, Rng& rng, double amount) {
    for (auto& v : t.mutable_values()) v = std::clamp(v + rng.uniform(-amount, amount), 0.0, 1.0);
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(
                    std::chrono::steady_clock::now().time_since_epoch().count()));
        path_ = std::filesystem::temp_directory_path() / ("srr_" + tag + "_" + std::to_string(rng.next_u64() % 1000000));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// FNV-1a over the raw bytes of a tensor's values.
inline std::uint64_t checksum(const Tensor& t) {
    std::uint64_t h = 1469598103934665603ULL;
    for (double v : t.values()) {
        const auto* p = reinterpret_cast<const unsigned char*>(&v);
        for (std::size_t i = 0; i < sizeof v; ++i) h = (h ^ p[i]) * 1099511628211ULL;
    }
    return h;
}

}  // namespace srr::test

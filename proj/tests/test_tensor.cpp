#include <doctest.h>

#include <cmath>

#include "srr/error.hpp"
#include "srr/ops.hpp"
#include "support.hpp"

using namespace srr;
using srr::test::max_grad_error;
using srr::test::probe_sum;
using srr::test::random_tensor;

namespace {

double naive_conv_at(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad,
                     std::size_t n, std::size_t o, std::size_t oy, std::size_t ox) {
    const std::size_t C = x.dim(1), H = x.dim(2), W = x.dim(3), k = w.dim(2);
    double acc = b.defined() ? b.at({o}) : 0.0;
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
                acc += x.at({n, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)}) * w.at({o, c, ky, kx});
            }
    return acc;
}

double bilinear_oracle(const Tensor& x, std::size_t n, std::size_t c, std::size_t oy, std::size_t ox,
                       std::size_t out_h, std::size_t out_w) {
    const std::size_t H = x.dim(2), W = x.dim(3);
    auto coord = [](std::size_t d, std::size_t in, std::size_t out) {
        const double s = (static_cast<double>(d) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
        return std::clamp(s, 0.0, static_cast<double>(in - 1));
    };
    const double sy = coord(oy, H, out_h), sx = coord(ox, W, out_w);
    const auto y0 = static_cast<std::size_t>(std::floor(sy)), x0 = static_cast<std::size_t>(std::floor(sx));
    const std::size_t y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
    const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
    return (1 - fy) * ((1 - fx) * x.at({n, c, y0, x0}) + fx * x.at({n, c, y0, x1})) +
           fy * ((1 - fx) * x.at({n, c, y1, x0}) + fx * x.at({n, c, y1, x1}));
}

}  // namespace

TEST_CASE("broadcasting add and mul follow numpy rules") {
    const Tensor a = Tensor::from_values({2, 1, 3}, {1, 2, 3, 4, 5, 6});
    const Tensor b = Tensor::from_values({4, 1}, {10, 20, 30, 40});
    const Tensor s = a + b;
    CHECK(s.shape() == Shape{2, 4, 3});
    CHECK(s.at({1, 2, 0}) == doctest::Approx(34));
    CHECK((a * b).at({0, 3, 2}) == doctest::Approx(120));
    CHECK_THROWS_AS(a + Tensor::zeros({2, 2}), DimensionError);
}

TEST_CASE("matmul matches the triple loop, with batch broadcasting") {
    Rng rng(1);
    const Tensor a = random_tensor({2, 3, 4}, rng), b = random_tensor({4, 5}, rng);
    const Tensor c = matmul(a, b);
    REQUIRE(c.shape() == Shape{2, 3, 5});
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 5; ++j) {
                double acc = 0;
                for (std::size_t k = 0; k < 4; ++k) acc += a.at({n, i, k}) * b.at({k, j});
                CHECK(c.at({n, i, j}) == doctest::Approx(acc).epsilon(1e-12));
            }
    const Tensor bt = random_tensor({2, 5, 4}, rng);
    const Tensor d = matmul_transposed(a, bt);
    const Tensor e = matmul(a, transpose(bt, 1, 2));
    for (std::size_t i = 0; i < d.numel(); ++i) CHECK(d.values()[i] == doctest::Approx(e.values()[i]).epsilon(1e-12));
}

TEST_CASE("conv2d matches direct summation for strided and padded kernels") {
    Rng rng(2);
    for (auto [k, stride, pad] : {std::tuple{3u, 1u, 1u}, {7u, 4u, 3u}, {3u, 2u, 1u}, {1u, 1u, 0u}, {2u, 2u, 0u}}) {
        const Tensor x = random_tensor({2, 3, 9, 8}, rng);
        const Tensor w = random_tensor({4, 3, k, k}, rng);
        const Tensor b = random_tensor({4}, rng);
        const Tensor y = conv2d(x, w, b, stride, pad);
        REQUIRE(y.dim(2) == conv_output_extent(9, k, stride, pad));
        REQUIRE(y.dim(3) == conv_output_extent(8, k, stride, pad));
        for (std::size_t n = 0; n < 2; ++n)
            for (std::size_t o = 0; o < 4; ++o)
                for (std::size_t oy = 0; oy < y.dim(2); ++oy)
                    for (std::size_t ox = 0; ox < y.dim(3); ++ox)
                        CHECK(y.at({n, o, oy, ox}) ==
                              doctest::Approx(naive_conv_at(x, w, b, stride, pad, n, o, oy, ox)).epsilon(1e-12));
    }
}

TEST_CASE("softmax rows are positive and sum to one, stable for large logits") {
    const Tensor x = Tensor::from_values({2, 3}, {1000, 1001, 1002, -5, 0, 5});
    const Tensor p = softmax(x, -1);
    for (std::size_t r = 0; r < 2; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(p.at({r, c}) > 0);
            s += p.at({r, c});
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
    }
    CHECK(p.at({0, 2}) == doctest::Approx(std::exp(2.0) / (1 + std::exp(1.0) + std::exp(2.0))));
}

TEST_CASE("layer_norm gives zero mean and unit variance before the affine map") {
    Rng rng(3);
    const Tensor x = random_tensor({4, 6}, rng, -3, 3);
    const Tensor y = layer_norm(x, Tensor::full({6}, 1.0), Tensor::zeros({6}), 0.0);
    for (std::size_t r = 0; r < 4; ++r) {
        double m = 0, v = 0;
        for (std::size_t c = 0; c < 6; ++c) m += y.at({r, c});
        m /= 6;
        for (std::size_t c = 0; c < 6; ++c) v += (y.at({r, c}) - m) * (y.at({r, c}) - m);
        CHECK(m == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(v / 6 == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("bilinear resize uses half-pixel centres with clamped edges") {
    Rng rng(4);
    const Tensor x = random_tensor({1, 2, 5, 4}, rng);
    for (auto [h, w] : {std::pair{10u, 8u}, {3u, 7u}, {5u, 4u}}) {
        const Tensor y = bilinear_resize(x, h, w);
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t oy = 0; oy < h; ++oy)
                for (std::size_t ox = 0; ox < w; ++ox)
                    CHECK(y.at({0, c, oy, ox}) == doctest::Approx(bilinear_oracle(x, 0, c, oy, ox, h, w)).epsilon(1e-12));
    }
    CHECK(srr::test::bit_identical(bilinear_resize(x, 5, 4), x));
}

TEST_CASE("avg_pool2d averages non-overlapping blocks") {
    const Tensor x = Tensor::from_values({1, 1, 2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
    const Tensor y = avg_pool2d(x, 2);
    CHECK(y.shape() == Shape{1, 1, 1, 2});
    CHECK(y.at({0, 0, 0, 0}) == doctest::Approx(3.5));
    CHECK(y.at({0, 0, 0, 1}) == doctest::Approx(5.5));
    CHECK_THROWS(avg_pool2d(Tensor::zeros({1, 1, 3, 4}), 2));
}

TEST_CASE("bce_with_logits equals the textbook formula") {
    const Tensor x = Tensor::from_values({4}, {-30, -0.5, 0.7, 40});
    const Tensor t = Tensor::from_values({4}, {0, 1, 0, 1});
    double expect = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        const double p = 1 / (1 + std::exp(-x.values()[i]));
        const double ti = t.values()[i];
        expect += ti ? -std::log(p) : -std::log1p(-p);
    }
    CHECK(bce_with_logits(x, t).item() == doctest::Approx(expect / 4).epsilon(1e-12));
}

TEST_CASE("every differentiable op passes a finite-difference check") {
    Rng rng(5);
    auto leaf = [&](const Shape& s, double lo = -1, double hi = 1) { return random_tensor(s, rng, lo, hi, true); };

    SUBCASE("elementwise") {
        Tensor a = leaf({2, 3}), b = leaf({3});
        CHECK(max_grad_error(a, [&] { return probe_sum(a * b + a - b); }) < 1e-6);
        CHECK(max_grad_error(b, [&] { return probe_sum(a * b + a - b); }) < 1e-6);
        CHECK(max_grad_error(a, [&] { return probe_sum(sigmoid(a) + tanh(a) + gelu(a)); }) < 1e-6);
        CHECK(max_grad_error(a, [&] { return probe_sum(add_scalar(scale(a, 3.0), 1.0)); }) < 1e-6);
    }
    SUBCASE("matmul") {
        Tensor a = leaf({2, 3, 4}), b = leaf({2, 5, 4});
        CHECK(max_grad_error(a, [&] { return probe_sum(matmul_transposed(a, b)); }) < 1e-6);
        CHECK(max_grad_error(b, [&] { return probe_sum(matmul(a, transpose(b, 1, 2))); }) < 1e-6);
        Tensor c = leaf({4, 2});
        CHECK(max_grad_error(c, [&] { return probe_sum(matmul(a, c)); }) < 1e-6);
    }
    SUBCASE("layout") {
        Tensor a = leaf({2, 3, 4});
        CHECK(max_grad_error(a, [&] { return probe_sum(permute(reshape(a, {2, 12, 1}), {2, 0, 1})); }) < 1e-6);
        CHECK(max_grad_error(a, [&] { return probe_sum(slice(a, 1, 1, 2)); }) < 1e-6);
        Tensor b = leaf({2, 1, 4});
        CHECK(max_grad_error(b, [&] { return probe_sum(concat({a, b, a}, 1)); }) < 1e-6);
    }
    SUBCASE("softmax and norms") {
        Tensor a = leaf({3, 5}, -2, 2);
        CHECK(max_grad_error(a, [&] { return probe_sum(softmax(a, -1)); }) < 1e-6);
        CHECK(max_grad_error(a, [&] { return probe_sum(softmax(a, 0)); }) < 1e-6);
        Tensor g = leaf({5}), b = leaf({5});
        CHECK(max_grad_error(a, [&] { return probe_sum(layer_norm(a, g, b)); }) < 1e-5);
        CHECK(max_grad_error(g, [&] { return probe_sum(layer_norm(a, g, b)); }) < 1e-6);
        CHECK(max_grad_error(b, [&] { return probe_sum(layer_norm(a, g, b)); }) < 1e-6);
    }
    SUBCASE("linear and conv") {
        Tensor x = leaf({2, 3, 4}), w = leaf({5, 4}), bias = leaf({5});
        CHECK(max_grad_error(x, [&] { return probe_sum(linear(x, w, bias)); }) < 1e-6);
        CHECK(max_grad_error(w, [&] { return probe_sum(linear(x, w, bias)); }) < 1e-6);
        CHECK(max_grad_error(bias, [&] { return probe_sum(linear(x, w, bias)); }) < 1e-6);
        Tensor m = leaf({1, 2, 7, 6}), k = leaf({3, 2, 3, 3}), kb = leaf({3});
        CHECK(max_grad_error(m, [&] { return probe_sum(conv2d(m, k, kb, 2, 1)); }) < 1e-6);
        CHECK(max_grad_error(k, [&] { return probe_sum(conv2d(m, k, kb, 2, 1)); }) < 1e-6);
        CHECK(max_grad_error(kb, [&] { return probe_sum(conv2d(m, k, kb, 1, 1)); }) < 1e-6);
        Tensor k1 = leaf({3, 2, 1, 1});
        CHECK(max_grad_error(m, [&] { return probe_sum(conv2d(m, k1, Tensor(), 1, 0)); }) < 1e-6);
    }
    SUBCASE("resampling and reductions") {
        Tensor m = leaf({1, 2, 4, 6});
        CHECK(max_grad_error(m, [&] { return probe_sum(bilinear_resize(m, 7, 5)); }) < 1e-6);
        CHECK(max_grad_error(m, [&] { return probe_sum(avg_pool2d(m, 2)); }) < 1e-6);
        CHECK(max_grad_error(m, [&] { return mean(m * m); }) < 1e-6);
        const Tensor t = srr::test::random_mask({1, 2, 4, 6}, rng);
        CHECK(max_grad_error(m, [&] { return bce_with_logits(m, t); }) < 1e-6);
        CHECK(max_grad_error(m, [&] { return mse(m, t); }) < 1e-6);
        CHECK(max_grad_error(m, [&] { return probe_sum(map_to_tokens(m)); }) < 1e-6);
    }
}

TEST_CASE("autodiff semantics: accumulation, reuse, detach, frozen, no-grad") {
    Tensor x = Tensor::from_values({2}, {1.5, -2.0}, true);
    sum(x * x).backward();
    CHECK(x.grad()[0] == doctest::Approx(3.0));
    sum(x).backward();
    CHECK(x.grad()[0] == doctest::Approx(4.0));
    x.zero_grad();

    // diamond: y used by two branches
    const Tensor y = x * x;
    sum(y + y * y).backward();
    CHECK(x.grad()[1] == doctest::Approx(2 * -2.0 + 4 * std::pow(-2.0, 3)));
    x.zero_grad();

    sum(x.detach() * x).backward();
    CHECK(x.grad()[0] == doctest::Approx(1.5));
    x.zero_grad();

    Tensor w = Tensor::from_values({2}, {3.0, 4.0}, true);
    w.set_frozen(true);
    sum(w * x).backward();
    CHECK(w.grad()[0] == 0.0);
    CHECK(x.grad()[1] == doctest::Approx(4.0));

    {
        NoGradGuard ng;
        CHECK_FALSE((x * x).requires_grad());
    }
    CHECK((x * x).requires_grad());
    CHECK_THROWS_AS((x * x).backward(), UsageError);
}

TEST_CASE("non-finite values are reported") {
    CHECK_THROWS_AS(require_finite(Tensor::from_values({2}, {1.0, NAN}), "probe"), NumericError);
    CHECK_NOTHROW(require_finite(Tensor::from_values({2}, {1.0, 2.0}), "probe"));
}

#include "srr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "srr/error.hpp"

#ifdef SRR_USE_CBLAS
#include <cblas.h>
#endif

namespace srr {

namespace {

using detail::Node;

void accumulate(Node& parent, std::span<const double> g) {
    if (!parent.tracks_grad()) return;
    auto& dst = parent.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

int normalize_axis(int axis, std::size_t rank) {
    const int r = static_cast<int>(rank);
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) throw DimensionError("axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
    return a;
}

#ifdef SRR_USE_CBLAS

// C[m,n] += A[m,k] B[k,n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    if (m == 0 || n == 0 || k == 0) return;
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), 1.0, a, static_cast<int>(k), b, static_cast<int>(n), 1.0, c, static_cast<int>(n));
}

// C[m,n] += A[m,k] B[n,k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    if (m == 0 || n == 0 || k == 0) return;
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), 1.0, a, static_cast<int>(k), b, static_cast<int>(k), 1.0, c, static_cast<int>(n));
}

// C[m,n] += A[k,m]^T B[k,n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    if (m == 0 || n == 0 || k == 0) return;
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), 1.0, a, static_cast<int>(m), b, static_cast<int>(n), 1.0, c, static_cast<int>(n));
}

#else

// C[m,n] += A[m,k] B[k,n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0) continue;
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// C[m,n] += A[m,k] B[n,k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            c[i * n + j] += acc;
        }
    }
}

// C[m,n] += A[k,m]^T B[k,n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = a + p * m;
        const double* bp = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = ap[i];
            if (av == 0.0) continue;
            double* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

#endif

struct BroadcastPlan {
    Shape out;
    std::vector<std::size_t> a_index;
    std::vector<std::size_t> b_index;
    bool identity = false;
};

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b, const char* op) {
    BroadcastPlan plan;
    if (a == b) {
        plan.out = a;
        plan.identity = true;
        return plan;
    }
    const std::size_t r = std::max(a.size(), b.size());
    plan.out.assign(r, 1);
    std::vector<std::size_t> sa(r, 0), sb(r, 0);
    std::size_t stride_a = 1, stride_b = 1;
    for (std::size_t i = 0; i < r; ++i) {
        const std::size_t axis = r - 1 - i;
        const std::size_t ea = i < a.size() ? a[a.size() - 1 - i] : 1;
        const std::size_t eb = i < b.size() ? b[b.size() - 1 - i] : 1;
        if (ea != eb && ea != 1 && eb != 1) {
            throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        }
        plan.out[axis] = std::max(ea, eb);
        sa[axis] = (ea == 1) ? 0 : stride_a;
        sb[axis] = (eb == 1) ? 0 : stride_b;
        stride_a *= ea;
        stride_b *= eb;
    }
    const std::size_t n = shape_numel(plan.out);
    plan.a_index.resize(n);
    plan.b_index.resize(n);
    std::vector<std::size_t> counter(r, 0);
    std::size_t ia = 0, ib = 0;
    for (std::size_t lin = 0; lin < n; ++lin) {
        plan.a_index[lin] = ia;
        plan.b_index[lin] = ib;
        for (std::size_t d = r; d-- > 0;) {
            ++counter[d];
            ia += sa[d];
            ib += sb[d];
            if (counter[d] < plan.out[d]) break;
            ia -= sa[d] * counter[d];
            ib -= sb[d] * counter[d];
            counter[d] = 0;
        }
    }
    return plan;
}

enum class BinaryKind { Add, Sub, Mul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind, const char* name) {
    auto plan = std::make_shared<BroadcastPlan>(plan_broadcast(a.shape(), b.shape(), name));
    const auto av = a.values();
    const auto bv = b.values();
    const std::size_t n = shape_numel(plan->out);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = av[plan->identity ? i : plan->a_index[i]];
        const double y = bv[plan->identity ? i : plan->b_index[i]];
        out[i] = kind == BinaryKind::Add ? x + y : kind == BinaryKind::Sub ? x - y : x * y;
    }
    return make_result(plan->out, std::move(out), {a, b}, [plan, kind](Node& o) {
        Node& pa = *o.parents[0];
        Node& pb = *o.parents[1];
        const std::size_t n = o.value.size();
        if (pa.tracks_grad()) {
            auto& ga = pa.ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t j = plan->identity ? i : plan->b_index[i];
                const double d = kind == BinaryKind::Mul ? o.grad[i] * pb.value[j] : o.grad[i];
                ga[plan->identity ? i : plan->a_index[i]] += d;
            }
        }
        if (pb.tracks_grad()) {
            auto& gb = pb.ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t j = plan->identity ? i : plan->a_index[i];
                double d = o.grad[i];
                if (kind == BinaryKind::Sub) d = -d;
                if (kind == BinaryKind::Mul) d *= pa.value[j];
                gb[plan->identity ? i : plan->b_index[i]] += d;
            }
        }
    });
}

template <class F, class DF>
Tensor unary(const Tensor& x, F f, DF df_from_xy) {
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
    return make_result(x.shape(), std::move(out), {x}, [df_from_xy](Node& o) {
        Node& p = *o.parents[0];
        if (!p.tracks_grad()) return;
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < o.value.size(); ++i) g[i] += o.grad[i] * df_from_xy(p.value[i], o.value[i]);
    });
}

// Splits a shape around `axis` into (outer, extent, inner).
struct AxisSplit {
    std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
    AxisSplit r;
    for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
    r.extent = s[axis];
    for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

Tensor batched_matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() < 2 || sb.size() < 2) {
        throw DimensionError("matmul needs rank >= 2 operands, got " + shape_str(sa) + " and " + shape_str(sb));
    }
    const std::size_t m = sa[sa.size() - 2], k = sa.back();
    const std::size_t kb = transpose_b ? sb.back() : sb[sb.size() - 2];
    const std::size_t n = transpose_b ? sb[sb.size() - 2] : sb.back();
    if (k != kb) throw DimensionError("matmul inner extents differ: " + shape_str(sa) + " x " + shape_str(sb));

    const Shape batch_a(sa.begin(), sa.end() - 2);
    const Shape batch_b(sb.begin(), sb.end() - 2);
    auto plan = std::make_shared<BroadcastPlan>(plan_broadcast(batch_a, batch_b, "matmul"));
    const std::size_t batches = shape_numel(plan->out);

    Shape out_shape = plan->out;
    out_shape.push_back(m);
    out_shape.push_back(n);
    std::vector<double> out(batches * m * n, 0.0);
    const double* av = a.values().data();
    const double* bv = b.values().data();
    for (std::size_t t = 0; t < batches; ++t) {
        const std::size_t ia = plan->identity ? t : plan->a_index[t];
        const std::size_t ib = plan->identity ? t : plan->b_index[t];
        if (transpose_b)
            gemm_nt(m, n, k, av + ia * m * k, bv + ib * n * k, out.data() + t * m * n);
        else
            gemm_nn(m, n, k, av + ia * m * k, bv + ib * k * n, out.data() + t * m * n);
    }
    return make_result(std::move(out_shape), std::move(out), {a, b},
                       [plan, batches, m, n, k, transpose_b](Node& o) {
                           Node& pa = *o.parents[0];
                           Node& pb = *o.parents[1];
                           for (std::size_t t = 0; t < batches; ++t) {
                               const std::size_t ia = plan->identity ? t : plan->a_index[t];
                               const std::size_t ib = plan->identity ? t : plan->b_index[t];
                               const double* g = o.grad.data() + t * m * n;
                               if (pa.tracks_grad()) {
                                   double* ga = pa.ensure_grad().data() + ia * m * k;
                                   // dA = dC B^T (or dC B when B was transposed)
                                   if (transpose_b)
                                       gemm_nn(m, k, n, g, pb.value.data() + ib * n * k, ga);
                                   else
                                       gemm_nt(m, k, n, g, pb.value.data() + ib * k * n, ga);
                               }
                               if (pb.tracks_grad()) {
                                   if (transpose_b) {
                                       // dB[n,k] = dC^T A
                                       double* gb = pb.ensure_grad().data() + ib * n * k;
                                       gemm_tn(n, k, m, g, pa.value.data() + ia * m * k, gb);
                                   } else {
                                       // dB[k,n] = A^T dC
                                       double* gb = pb.ensure_grad().data() + ib * k * n;
                                       gemm_tn(k, n, m, pa.value.data() + ia * m * k, g, gb);
                                   }
                               }
                           }
                       });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Mul, "mul"); }

Tensor scale(const Tensor& x, double factor) {
    return unary(x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
    return unary(x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x,
        [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
    return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor gelu(const Tensor& x) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    return unary(
        x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
        [inv_sqrt_2pi](double v, double) {
            return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
        });
}

Tensor matmul(const Tensor& a, const Tensor& b) { return batched_matmul(a, b, false); }
Tensor matmul_transposed(const Tensor& a, const Tensor& b) { return batched_matmul(a, b, true); }

Tensor reshape(const Tensor& x, const Shape& shape) {
    if (shape_numel(shape) != x.numel()) {
        throw DimensionError("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
    }
    std::vector<double> out(x.values().begin(), x.values().end());
    return make_result(shape, std::move(out), {x}, [](Node& o) { accumulate(*o.parents[0], o.grad); });
}

namespace {

// Visits output positions of a permuted view in order, passing (out index, source offset).
template <class F>
void for_each_permuted(const Shape& out_shape, const std::vector<std::size_t>& strides, F&& f) {
    const std::size_t r = out_shape.size();
    const std::size_t n = shape_numel(out_shape);
    if (n == 0) return;
    if (r == 0) {
        f(0, 0);
        return;
    }
    const std::size_t inner = out_shape[r - 1], inner_stride = strides[r - 1];
    std::vector<std::size_t> counter(r, 0);
    std::size_t off = 0;
    for (std::size_t lin = 0; lin < n; lin += inner) {
        for (std::size_t j = 0; j < inner; ++j) f(lin + j, off + j * inner_stride);
        for (std::size_t d = r - 1; d-- > 0;) {
            ++counter[d];
            off += strides[d];
            if (counter[d] < out_shape[d]) break;
            off -= strides[d] * counter[d];
            counter[d] = 0;
        }
    }
}

}  // namespace

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
    const Shape& in = x.shape();
    const std::size_t r = in.size();
    if (order.size() != r) throw DimensionError("permute order rank mismatch for " + shape_str(in));
    std::vector<bool> seen(r, false);
    for (std::size_t o : order) {
        if (o >= r || seen[o]) throw DimensionError("invalid permutation for " + shape_str(in));
        seen[o] = true;
    }
    std::vector<std::size_t> in_strides(r, 1);
    for (std::size_t d = r; d-- > 1;) in_strides[d - 1] = in_strides[d] * in[d];
    Shape out_shape(r);
    std::vector<std::size_t> strides(r);
    for (std::size_t d = 0; d < r; ++d) {
        out_shape[d] = in[order[d]];
        strides[d] = in_strides[order[d]];
    }
    const double* xv = x.values().data();
    std::vector<double> out(x.numel());
    for_each_permuted(out_shape, strides, [&](std::size_t i, std::size_t src) { out[i] = xv[src]; });
    return make_result(out_shape, std::move(out), {x}, [out_shape, strides](Node& o) {
        Node& p = *o.parents[0];
        if (!p.tracks_grad()) return;
        double* g = p.ensure_grad().data();
        const double* og = o.grad.data();
        for_each_permuted(out_shape, strides, [&](std::size_t i, std::size_t src) { g[src] += og[i]; });
    });
}

Tensor transpose(const Tensor& x, int axis0, int axis1) {
    const std::size_t r = x.rank();
    std::vector<std::size_t> order(r);
    for (std::size_t i = 0; i < r; ++i) order[i] = i;
    std::swap(order[static_cast<std::size_t>(normalize_axis(axis0, r))],
              order[static_cast<std::size_t>(normalize_axis(axis1, r))]);
    return permute(x, order);
}

Tensor softmax(const Tensor& x, int axis) {
    const std::size_t a = static_cast<std::size_t>(normalize_axis(axis, x.rank()));
    const AxisSplit s = split_at(x.shape(), a);
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.extent * s.inner + in;
            double mx = xv[base];
            for (std::size_t e = 1; e < s.extent; ++e) mx = std::max(mx, xv[base + e * s.inner]);
            double total = 0.0;
            for (std::size_t e = 0; e < s.extent; ++e) {
                const double v = std::exp(xv[base + e * s.inner] - mx);
                out[base + e * s.inner] = v;
                total += v;
            }
            for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] /= total;
        }
    }
    return make_result(x.shape(), std::move(out), {x}, [s](Node& o) {
        Node& p = *o.parents[0];
        if (!p.tracks_grad()) return;
        auto& g = p.ensure_grad();
        for (std::size_t ou = 0; ou < s.outer; ++ou) {
            for (std::size_t in = 0; in < s.inner; ++in) {
                const std::size_t base = ou * s.extent * s.inner + in;
                double dot = 0.0;
                for (std::size_t e = 0; e < s.extent; ++e) {
                    const std::size_t i = base + e * s.inner;
                    dot += o.grad[i] * o.value[i];
                }
                for (std::size_t e = 0; e < s.extent; ++e) {
                    const std::size_t i = base + e * s.inner;
                    g[i] += o.value[i] * (o.grad[i] - dot);
                }
            }
        }
    });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    const Shape& xs = x.shape();
    if (xs.empty() || w.rank() != 2 || w.dim(1) != xs.back()) {
        throw DimensionError("linear: input " + shape_str(xs) + " does not match weight " + shape_str(w.shape()));
    }
    const std::size_t in = w.dim(1), out_f = w.dim(0);
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_f)) {
        throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match weight " + shape_str(w.shape()));
    }
    const std::size_t rows = x.numel() / in;
    Shape out_shape = xs;
    out_shape.back() = out_f;
    std::vector<double> out(rows * out_f, 0.0);
    if (bias.defined()) {
        const auto bv = bias.values();
        for (std::size_t r = 0; r < rows; ++r) std::copy(bv.begin(), bv.end(), out.begin() + r * out_f);
    }
    gemm_nt(rows, out_f, in, x.values().data(), w.values().data(), out.data());
    std::vector<Tensor> parents{x, w};
    if (bias.defined()) parents.push_back(bias);
    return make_result(std::move(out_shape), std::move(out), parents, [rows, in, out_f](Node& o) {
        Node& px = *o.parents[0];
        Node& pw = *o.parents[1];
        if (px.tracks_grad()) gemm_nn(rows, in, out_f, o.grad.data(), pw.value.data(), px.ensure_grad().data());
        if (pw.tracks_grad()) gemm_tn(out_f, in, rows, o.grad.data(), px.value.data(), pw.ensure_grad().data());
        if (o.parents.size() > 2 && o.parents[2]->tracks_grad()) {
            auto& gb = o.parents[2]->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < out_f; ++j) gb[j] += o.grad[r * out_f + j];
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const Shape& xs = x.shape();
    if (xs.empty()) throw DimensionError("layer_norm on a scalar");
    const std::size_t c = xs.back();
    if (gamma.numel() != c || beta.numel() != c) {
        throw DimensionError("layer_norm: affine extent does not match input " + shape_str(xs));
    }
    const std::size_t rows = x.numel() / c;
    const auto xv = x.values();
    const auto gv = gamma.values();
    const auto bv = beta.values();
    auto xhat = std::make_shared<std::vector<double>>(xv.size());
    auto rstd = std::make_shared<std::vector<double>>(rows);
    std::vector<double> out(xv.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = xv.data() + r * c;
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += row[j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(c);
        const double rs = 1.0 / std::sqrt(var + eps);
        (*rstd)[r] = rs;
        for (std::size_t j = 0; j < c; ++j) {
            const double h = (row[j] - mu) * rs;
            (*xhat)[r * c + j] = h;
            out[r * c + j] = h * gv[j] + bv[j];
        }
    }
    return make_result(xs, std::move(out), {x, gamma, beta}, [xhat, rstd, rows, c](Node& o) {
        Node& px = *o.parents[0];
        Node& pg = *o.parents[1];
        Node& pb = *o.parents[2];
        if (pg.tracks_grad() || pb.tracks_grad()) {
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t j = 0; j < c; ++j) {
                    const double g = o.grad[r * c + j];
                    if (pg.tracks_grad()) pg.ensure_grad()[j] += g * (*xhat)[r * c + j];
                    if (pb.tracks_grad()) pb.ensure_grad()[j] += g;
                }
            }
        }
        if (!px.tracks_grad()) return;
        auto& gx = px.ensure_grad();
        const double inv_c = 1.0 / static_cast<double>(c);
        for (std::size_t r = 0; r < rows; ++r) {
            double mean_d = 0.0, mean_dh = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                const double d = o.grad[r * c + j] * pg.value[j];
                mean_d += d;
                mean_dh += d * (*xhat)[r * c + j];
            }
            mean_d *= inv_c;
            mean_dh *= inv_c;
            for (std::size_t j = 0; j < c; ++j) {
                const double d = o.grad[r * c + j] * pg.value[j];
                gx[r * c + j] += (*rstd)[r] * (d - mean_d - (*xhat)[r * c + j] * mean_dh);
            }
        }
    });
}

std::size_t conv_output_extent(std::size_t input, std::size_t kernel, std::size_t stride, std::size_t padding) {
    if (stride == 0) throw ConfigError("convolution stride must be positive");
    const auto padded = static_cast<long long>(input + 2 * padding) - static_cast<long long>(kernel);
    if (padded < 0) {
        throw ConfigError("convolution produces a non-positive output extent (input " + std::to_string(input) +
                          ", kernel " + std::to_string(kernel) + ", padding " + std::to_string(padding) + ")");
    }
    return static_cast<std::size_t>(padded) / stride + 1;
}

namespace {

struct ConvGeometry {
    std::size_t cin, h, w, k, stride, padding, ho, wo;
};

// cols[(ci*k + ky)*k + kx][oy*wo + ox] = x[ci][oy*stride + ky - pad][ox*stride + kx - pad] (0 outside)
void im2col(const ConvGeometry& g, const double* x, double* cols) {
    const std::size_t positions = g.ho * g.wo;
    for (std::size_t ci = 0; ci < g.cin; ++ci)
        for (std::size_t ky = 0; ky < g.k; ++ky)
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                double* row = cols + ((ci * g.k + ky) * g.k + kx) * positions;
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const auto iy = static_cast<long long>(oy * g.stride + ky) - static_cast<long long>(g.padding);
                    double* dst = row + oy * g.wo;
                    if (iy < 0 || iy >= static_cast<long long>(g.h)) {
                        std::fill(dst, dst + g.wo, 0.0);
                        continue;
                    }
                    const double* src = x + (ci * g.h + static_cast<std::size_t>(iy)) * g.w;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const auto ix = static_cast<long long>(ox * g.stride + kx) - static_cast<long long>(g.padding);
                        dst[ox] = (ix < 0 || ix >= static_cast<long long>(g.w)) ? 0.0 : src[ix];
                    }
                }
            }
}

void col2im_add(const ConvGeometry& g, const double* cols, double* x) {
    const std::size_t positions = g.ho * g.wo;
    for (std::size_t ci = 0; ci < g.cin; ++ci)
        for (std::size_t ky = 0; ky < g.k; ++ky)
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                const double* row = cols + ((ci * g.k + ky) * g.k + kx) * positions;
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const auto iy = static_cast<long long>(oy * g.stride + ky) - static_cast<long long>(g.padding);
                    if (iy < 0 || iy >= static_cast<long long>(g.h)) continue;
                    double* dst = x + (ci * g.h + static_cast<std::size_t>(iy)) * g.w;
                    const double* src = row + oy * g.wo;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const auto ix = static_cast<long long>(ox * g.stride + kx) - static_cast<long long>(g.padding);
                        if (ix >= 0 && ix < static_cast<long long>(g.w)) dst[ix] += src[ox];
                    }
                }
            }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride, std::size_t padding) {
    if (x.rank() != 4 || w.rank() != 4 || w.dim(2) != w.dim(3)) {
        throw DimensionError("conv2d expects x[B,C,H,W] and square w[O,C,k,k], got " + shape_str(x.shape()) +
                             " and " + shape_str(w.shape()));
    }
    const std::size_t batch = x.dim(0), cout = w.dim(0);
    ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), w.dim(2), stride, padding, 0, 0};
    if (w.dim(1) != g.cin) {
        throw DimensionError("conv2d channel mismatch: input " + shape_str(x.shape()) + ", kernel " + shape_str(w.shape()));
    }
    if (bias.defined() && bias.numel() != cout) throw DimensionError("conv2d bias extent mismatch");
    g.ho = conv_output_extent(g.h, g.k, stride, padding);
    g.wo = conv_output_extent(g.w, g.k, stride, padding);
    const std::size_t patch = g.cin * g.k * g.k, positions = g.ho * g.wo, plane_in = g.cin * g.h * g.w;
    // a 1x1 stride-1 unpadded kernel reads the input directly
    const bool direct = g.k == 1 && stride == 1 && padding == 0;

    const auto xv = x.values();
    std::vector<double> out(batch * cout * positions, 0.0);
    std::vector<double> cols(direct ? 0 : patch * positions);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* xb = xv.data() + b * plane_in;
        if (!direct) im2col(g, xb, cols.data());
        double* ob = out.data() + b * cout * positions;
        if (bias.defined()) {
            const auto bv = bias.values();
            for (std::size_t o = 0; o < cout; ++o) std::fill(ob + o * positions, ob + (o + 1) * positions, bv[o]);
        }
        gemm_nn(cout, positions, patch, w.values().data(), direct ? xb : cols.data(), ob);
    }
    std::vector<Tensor> parents{x, w};
    if (bias.defined()) parents.push_back(bias);
    return make_result(Shape{batch, cout, g.ho, g.wo}, std::move(out), parents,
                       [g, batch, cout, patch, positions, plane_in, direct](Node& o) {
                           Node& px = *o.parents[0];
                           Node& pw = *o.parents[1];
                           std::vector<double> cols(direct ? 0 : patch * positions);
                           for (std::size_t b = 0; b < batch; ++b) {
                               const double* grad = o.grad.data() + b * cout * positions;
                               if (pw.tracks_grad()) {
                                   const double* xb = px.value.data() + b * plane_in;
                                   if (!direct) im2col(g, xb, cols.data());
                                   gemm_nt(cout, patch, positions, grad, direct ? xb : cols.data(),
                                           pw.ensure_grad().data());
                               }
                               if (px.tracks_grad()) {
                                   double* gx = px.ensure_grad().data() + b * plane_in;
                                   if (direct) {
                                       gemm_tn(patch, positions, cout, pw.value.data(), grad, gx);
                                   } else {
                                       std::fill(cols.begin(), cols.end(), 0.0);
                                       gemm_tn(patch, positions, cout, pw.value.data(), grad, cols.data());
                                       col2im_add(g, cols.data(), gx);
                                   }
                               }
                               if (o.parents.size() > 2 && o.parents[2]->tracks_grad()) {
                                   auto& gb = o.parents[2]->ensure_grad();
                                   for (std::size_t c = 0; c < cout; ++c)
                                       for (std::size_t p = 0; p < positions; ++p) gb[c] += grad[c * positions + p];
                               }
                           }
                       });
}

Tensor concat(std::span<const Tensor> parts, int axis) {
    if (parts.empty()) throw UsageError("concat of zero tensors");
    const Shape& first = parts[0].shape();
    const std::size_t a = static_cast<std::size_t>(normalize_axis(axis, first.size()));
    Shape out_shape = first;
    out_shape[a] = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t d = 0; ok && d < s.size(); ++d) ok = (d == a) || s[d] == first[d];
        if (!ok) throw DimensionError("concat: " + shape_str(s) + " incompatible with " + shape_str(first));
        out_shape[a] += s[a];
    }
    const AxisSplit so = split_at(out_shape, a);
    std::vector<double> out(shape_numel(out_shape));
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const auto& p : parts) {
        offsets.push_back(off);
        const std::size_t ext = p.shape()[a];
        const auto pv = p.values();
        for (std::size_t o = 0; o < so.outer; ++o)
            std::copy_n(pv.begin() + o * ext * so.inner, ext * so.inner,
                        out.begin() + (o * so.extent + off) * so.inner);
        off += ext;
    }
    std::vector<Tensor> parents(parts.begin(), parts.end());
    return make_result(out_shape, std::move(out), parents, [so, offsets, a](Node& o) {
        for (std::size_t i = 0; i < o.parents.size(); ++i) {
            Node& p = *o.parents[i];
            if (!p.tracks_grad()) continue;
            const std::size_t ext = p.shape[a];
            auto& g = p.ensure_grad();
            for (std::size_t ou = 0; ou < so.outer; ++ou) {
                const double* src = o.grad.data() + (ou * so.extent + offsets[i]) * so.inner;
                double* dst = g.data() + ou * ext * so.inner;
                for (std::size_t j = 0; j < ext * so.inner; ++j) dst[j] += src[j];
            }
        }
    });
}

Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t length) {
    const std::size_t a = static_cast<std::size_t>(normalize_axis(axis, x.rank()));
    const AxisSplit s = split_at(x.shape(), a);
    if (start + length > s.extent) {
        throw DimensionError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                             ") exceeds axis extent of " + shape_str(x.shape()));
    }
    Shape out_shape = x.shape();
    out_shape[a] = length;
    const auto xv = x.values();
    std::vector<double> out(s.outer * length * s.inner);
    for (std::size_t o = 0; o < s.outer; ++o)
        std::copy_n(xv.begin() + (o * s.extent + start) * s.inner, length * s.inner,
                    out.begin() + o * length * s.inner);
    return make_result(std::move(out_shape), std::move(out), {x}, [s, start, length](Node& o) {
        Node& p = *o.parents[0];
        if (!p.tracks_grad()) return;
        auto& g = p.ensure_grad();
        for (std::size_t ou = 0; ou < s.outer; ++ou) {
            const double* src = o.grad.data() + ou * length * s.inner;
            double* dst = g.data() + (ou * s.extent + start) * s.inner;
            for (std::size_t j = 0; j < length * s.inner; ++j) dst[j] += src[j];
        }
    });
}

namespace {

struct Tap {
    std::size_t i0, i1;
    double w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<Tap> resize_taps(std::size_t in, std::size_t out) {
    std::vector<Tap> taps(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t d = 0; d < out; ++d) {
        double src = (static_cast<double>(d) + 0.5) * ratio - 0.5;
        if (src < 0.0) src = 0.0;
        auto i0 = static_cast<std::size_t>(std::floor(src));
        if (i0 > in - 1) i0 = in - 1;
        const std::size_t i1 = std::min(i0 + 1, in - 1);
        taps[d] = {i0, i1, i1 == i0 ? 0.0 : src - static_cast<double>(i0)};
    }
    return taps;
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, std::size_t height, std::size_t width) {
    if (x.rank() != 4) throw DimensionError("bilinear_resize expects [B,C,H,W], got " + shape_str(x.shape()));
    if (height == 0 || width == 0) throw ConfigError("bilinear_resize to an empty extent");
    const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    auto ty = std::make_shared<std::vector<Tap>>(resize_taps(h, height));
    auto tx = std::make_shared<std::vector<Tap>>(resize_taps(w, width));
    const auto xv = x.values();
    std::vector<double> out(planes * height * width);
    for (std::size_t p = 0; p < planes; ++p) {
        const double* src = xv.data() + p * h * w;
        double* dst = out.data() + p * height * width;
        for (std::size_t y = 0; y < height; ++y) {
            const Tap& a = (*ty)[y];
            for (std::size_t xx = 0; xx < width; ++xx) {
                const Tap& b = (*tx)[xx];
                const double top = src[a.i0 * w + b.i0] * (1.0 - b.w1) + src[a.i0 * w + b.i1] * b.w1;
                const double bot = src[a.i1 * w + b.i0] * (1.0 - b.w1) + src[a.i1 * w + b.i1] * b.w1;
                dst[y * width + xx] = top * (1.0 - a.w1) + bot * a.w1;
            }
        }
    }
    return make_result(Shape{x.dim(0), x.dim(1), height, width}, std::move(out), {x},
                       [ty, tx, planes, h, w, height, width](Node& o) {
                           Node& px = *o.parents[0];
                           if (!px.tracks_grad()) return;
                           auto& g = px.ensure_grad();
                           for (std::size_t p = 0; p < planes; ++p) {
                               double* dst = g.data() + p * h * w;
                               const double* src = o.grad.data() + p * height * width;
                               for (std::size_t y = 0; y < height; ++y) {
                                   const Tap& a = (*ty)[y];
                                   for (std::size_t xx = 0; xx < width; ++xx) {
                                       const Tap& b = (*tx)[xx];
                                       const double d = src[y * width + xx];
                                       dst[a.i0 * w + b.i0] += d * (1.0 - a.w1) * (1.0 - b.w1);
                                       dst[a.i0 * w + b.i1] += d * (1.0 - a.w1) * b.w1;
                                       dst[a.i1 * w + b.i0] += d * a.w1 * (1.0 - b.w1);
                                       dst[a.i1 * w + b.i1] += d * a.w1 * b.w1;
                                   }
                               }
                           }
                       });
}

Tensor avg_pool2d(const Tensor& x, std::size_t k) {
    if (x.rank() != 4) throw DimensionError("avg_pool2d expects [B,C,H,W], got " + shape_str(x.shape()));
    if (k == 0 || x.dim(2) % k != 0 || x.dim(3) % k != 0) {
        throw DimensionError("avg_pool2d: extent of " + shape_str(x.shape()) + " not divisible by " + std::to_string(k));
    }
    const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = h / k, ow = w / k;
    const double inv = 1.0 / static_cast<double>(k * k);
    const auto xv = x.values();
    std::vector<double> out(planes * oh * ow, 0.0);
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t xx = 0; xx < w; ++xx)
                out[(p * oh + y / k) * ow + xx / k] += xv[(p * h + y) * w + xx] * inv;
    return make_result(Shape{x.dim(0), x.dim(1), oh, ow}, std::move(out), {x}, [planes, h, w, oh, ow, k, inv](Node& o) {
        Node& px = *o.parents[0];
        if (!px.tracks_grad()) return;
        auto& g = px.ensure_grad();
        for (std::size_t p = 0; p < planes; ++p)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t xx = 0; xx < w; ++xx)
                    g[(p * h + y) * w + xx] += o.grad[(p * oh + y / k) * ow + xx / k] * inv;
    });
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.values()) total += v;
    return make_result(Shape{}, {total}, {x}, [](Node& o) {
        Node& p = *o.parents[0];
        if (!p.tracks_grad()) return;
        for (auto& g : p.ensure_grad()) g += o.grad[0];
    });
}

Tensor mean(const Tensor& x) {
    if (x.numel() == 0) throw DimensionError("mean of an empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& target) {
    if (logits.shape() != target.shape()) {
        throw DimensionError("bce_with_logits: logits " + shape_str(logits.shape()) + " vs target " +
                             shape_str(target.shape()));
    }
    const auto xv = logits.values();
    const auto tv = target.values();
    const std::size_t n = xv.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = xv[i];
        total += std::max(x, 0.0) - x * tv[i] + std::log1p(std::exp(-std::abs(x)));
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    return make_result(Shape{}, {total * inv_n}, {logits, target}, [inv_n](Node& o) {
        Node& px = *o.parents[0];
        Node& pt = *o.parents[1];
        const double g = o.grad[0] * inv_n;
        for (std::size_t i = 0; i < px.value.size(); ++i) {
            const double x = px.value[i];
            if (px.tracks_grad()) {
                const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
                px.ensure_grad()[i] += g * (s - pt.value[i]);
            }
            if (pt.tracks_grad()) pt.ensure_grad()[i] += -g * x;
        }
    });
}

Tensor mse(const Tensor& prediction, const Tensor& target) {
    if (prediction.shape() != target.shape()) {
        throw DimensionError("mse: prediction " + shape_str(prediction.shape()) + " vs target " +
                             shape_str(target.shape()));
    }
    const Tensor diff = sub(prediction, target);
    return mean(mul(diff, diff));
}

Tensor map_to_tokens(const Tensor& map) {
    if (map.rank() != 4) throw DimensionError("map_to_tokens expects [B,C,H,W], got " + shape_str(map.shape()));
    const std::size_t b = map.dim(0), c = map.dim(1), n = map.dim(2) * map.dim(3);
    return permute(reshape(map, {b, c, n}), {0, 2, 1});
}

Tensor tokens_to_map(const Tensor& tokens, std::size_t height, std::size_t width) {
    if (tokens.rank() != 3 || tokens.dim(1) != height * width) {
        throw DimensionError("tokens " + shape_str(tokens.shape()) + " do not form a " + std::to_string(height) + "x" +
                             std::to_string(width) + " map");
    }
    const std::size_t b = tokens.dim(0), c = tokens.dim(2);
    return reshape(permute(tokens, {0, 2, 1}), {b, c, height, width});
}

}  // namespace srr

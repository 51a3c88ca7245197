#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "jcdi/errors.hpp"
#include "jcdi/fastmath.hpp"
#include "jcdi/kernels.hpp"
#include "jcdi/tensor.hpp"

namespace jcdi {

namespace detail {

template <typename T>
void permute_0213(const T* in, T* out, int a, int b, int c, int d, bool accumulate) {
    const int64_t rows = static_cast<int64_t>(a) * b * c;
#pragma omp parallel for schedule(static) if (rows * d > 16384)
    for (int64_t r = 0; r < rows; ++r) {
        const int ai = static_cast<int>(r / (static_cast<int64_t>(b) * c));
        const int rest = static_cast<int>(r % (static_cast<int64_t>(b) * c));
        const int bi = rest / c;
        const int ci = rest % c;
        const T* src = in + r * d;
        T* dst = out + ((static_cast<int64_t>(ai) * c + ci) * b + bi) * d;
        if (accumulate)
            for (int j = 0; j < d; ++j) dst[j] += src[j];
        else
            for (int j = 0; j < d; ++j) dst[j] = src[j];
    }
}

template <typename T>
T gelu_fwd(T x) {
    const T c = T(0.7978845608028654);  // sqrt(2/pi)
    const T a = T(0.044715);
    return T(0.5) * x * (T(1) + fastmath::fast_tanh(c * (x + a * x * x * x)));
}

template <typename T>
T gelu_bwd(T x) {
    const T c = T(0.7978845608028654);
    const T a = T(0.044715);
    const T u = c * (x + a * x * x * x);
    const T th = fastmath::fast_tanh(u);
    return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * c * (T(1) + T(3) * a * x * x);
}

}  // namespace detail

/// Reverse-mode autodiff over Tensor<T>. A tape is built fresh for every
/// training step; node ids index into the tape in topological order, so the
/// backward pass is a single reverse sweep. All gradient accumulation loops
/// assign each output element to exactly one thread in a fixed reduction
/// order, which keeps training bit-reproducible for any thread count.
template <typename T>
class Tape {
  public:
    struct Node {
        Tensor<T> val;
        Tensor<T> grad;  // allocated lazily during backward
        std::function<void(Tape&, int)> back;
        bool needs_grad = false;
    };

    int leaf(Tensor<T> v, bool needs_grad = true) {
        Node n;
        n.val = std::move(v);
        n.needs_grad = needs_grad;
        nodes_.push_back(std::move(n));
        parents_.push_back(Parents{});
        return static_cast<int>(nodes_.size()) - 1;
    }

    int constant(Tensor<T> v) { return leaf(std::move(v), false); }

    const Tensor<T>& val(int id) const { return nodes_[static_cast<size_t>(id)].val; }
    const Tensor<T>& grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }
    size_t size() const { return nodes_.size(); }

    // ----- elementwise -----

    int add(int a, int b) {
        check_same(a, b, "add");
        Tensor<T> out = Tensor<T>::uninit(val(a).shape);
        const T* pa = val(a).ptr();
        const T* pb = val(b).ptr();
        ew(out.numel(), [&](int64_t i, T* po) { po[i] = pa[i] + pb[i]; }, out.ptr());
        return push(std::move(out), {a, b}, [](Tape& t, int id) {
            const Tensor<T>& dy = t.nodes_[id].grad;
            t.accum_same(t.parent(id, 0), dy, T(1));
            t.accum_same(t.parent(id, 1), dy, T(1));
        });
    }

    int sub(int a, int b) {
        check_same(a, b, "sub");
        Tensor<T> out = Tensor<T>::uninit(val(a).shape);
        const T* pa = val(a).ptr();
        const T* pb = val(b).ptr();
        ew(out.numel(), [&](int64_t i, T* po) { po[i] = pa[i] - pb[i]; }, out.ptr());
        return push(std::move(out), {a, b}, [](Tape& t, int id) {
            const Tensor<T>& dy = t.nodes_[id].grad;
            t.accum_same(t.parent(id, 0), dy, T(1));
            t.accum_same(t.parent(id, 1), dy, T(-1));
        });
    }

    int mul(int a, int b) {
        check_same(a, b, "mul");
        Tensor<T> out = Tensor<T>::uninit(val(a).shape);
        const T* pa = val(a).ptr();
        const T* pb = val(b).ptr();
        ew(out.numel(), [&](int64_t i, T* po) { po[i] = pa[i] * pb[i]; }, out.ptr());
        return push(std::move(out), {a, b}, [](Tape& t, int id) {
            const Tensor<T>& dy = t.nodes_[id].grad;
            const int pa = t.parent(id, 0), pb_ = t.parent(id, 1);
            if (t.wants(pa)) {
                Tensor<T>& ga = t.ensure_grad(pa);
                const T* vb = t.val(pb_).ptr();
                const T* d = dy.ptr();
                ew(dy.numel(), [&](int64_t i, T* g) { g[i] += d[i] * vb[i]; }, ga.ptr());
            }
            if (t.wants(pb_)) {
                Tensor<T>& gb = t.ensure_grad(pb_);
                const T* va = t.val(pa).ptr();
                const T* d = dy.ptr();
                ew(dy.numel(), [&](int64_t i, T* g) { g[i] += d[i] * va[i]; }, gb.ptr());
            }
        });
    }

    int scale(int a, T s) {
        Tensor<T> out = Tensor<T>::uninit(val(a).shape);
        const T* pa = val(a).ptr();
        ew(out.numel(), [&](int64_t i, T* po) { po[i] = pa[i] * s; }, out.ptr());
        return push(std::move(out), {a}, [s](Tape& t, int id) {
            t.accum_same(t.parent(id, 0), t.nodes_[id].grad, s);
        });
    }

    int gelu(int a) {
        Tensor<T> out = Tensor<T>::uninit(val(a).shape);
        const T* pa = val(a).ptr();
        ew_simd(out.numel(), [&](int64_t i, T* po) { po[i] = detail::gelu_fwd(pa[i]); }, out.ptr());
        return push(std::move(out), {a}, [](Tape& t, int id) {
            const int pa = t.parent(id, 0);
            if (!t.wants(pa)) return;
            Tensor<T>& ga = t.ensure_grad(pa);
            const T* x = t.val(pa).ptr();
            const T* d = t.nodes_[id].grad.ptr();
            ew_simd(ga.numel(), [&](int64_t i, T* g) { g[i] += d[i] * detail::gelu_bwd(x[i]); }, ga.ptr());
        });
    }

    // ----- linear algebra -----

    /// A[..., k] x B[k, n] -> [..., n]
    int matmul(int a, int b) {
        const Tensor<T>& va = val(a);
        const Tensor<T>& vb = val(b);
        if (vb.ndim() != 2 || va.shape.back() != vb.dim(0))
            throw contract_error("matmul: shape mismatch " + shape_str(va.shape) + " x " + shape_str(vb.shape));
        const int k = vb.dim(0), n = vb.dim(1);
        const int m = static_cast<int>(va.numel() / k);
        std::vector<int> oshape(va.shape.begin(), va.shape.end() - 1);
        oshape.push_back(n);
        Tensor<T> out = Tensor<T>::uninit(oshape);
        kernels::matmul_nn(va.ptr(), vb.ptr(), out.ptr(), m, k, n);
        return push(std::move(out), {a, b}, [m, k, n](Tape& t, int id) {
            const T* dy = t.nodes_[id].grad.ptr();
            const int pa = t.parent(id, 0), pb = t.parent(id, 1);
            if (t.wants(pa))
                kernels::matmul_nt<T, true>(dy, t.val(pb).ptr(), t.ensure_grad(pa).ptr(), m, n, k);
            if (t.wants(pb))
                kernels::matmul_tn<T, true>(t.val(pa).ptr(), dy, t.ensure_grad(pb).ptr(), m, k, n);
        });
    }

    /// A[..., k] x W[k, n] + bias[n] in one pass.
    int linear(int a, int w, int bias) {
        const Tensor<T>& va = val(a);
        const Tensor<T>& vw = val(w);
        if (vw.ndim() != 2 || va.shape.back() != vw.dim(0))
            throw contract_error("linear: shape mismatch " + shape_str(va.shape) + " x " + shape_str(vw.shape));
        const int k = vw.dim(0), n = vw.dim(1);
        if (val(bias).numel() != n) throw contract_error("linear: bias width mismatch");
        const int m = static_cast<int>(va.numel() / k);
        std::vector<int> oshape(va.shape.begin(), va.shape.end() - 1);
        oshape.push_back(n);
        Tensor<T> out = Tensor<T>::uninit(oshape);
        kernels::matmul_nn_bias(va.ptr(), vw.ptr(), val(bias).ptr(), out.ptr(), m, k, n);
        return push(std::move(out), {a, w, bias}, [m, k, n](Tape& t, int id) {
            const T* dy = t.nodes_[id].grad.ptr();
            const int pa = t.parent(id, 0), pw = t.parent(id, 1), pb = t.parent(id, 2);
            if (t.wants(pa))
                kernels::matmul_nt<T, true>(dy, t.val(pw).ptr(), t.ensure_grad(pa).ptr(), m, n, k);
            if (t.wants(pw))
                kernels::matmul_tn<T, true>(t.val(pa).ptr(), dy, t.ensure_grad(pw).ptr(), m, k, n);
            if (t.wants(pb)) {
                T* g = t.ensure_grad(pb).ptr();
                for (int64_t r = 0; r < m; ++r)
                    for (int j = 0; j < n; ++j) g[j] += dy[r * n + j];
            }
        });
    }

    /// A[..., n] + bias[n]
    int add_bias(int a, int bias) {
        const Tensor<T>& va = val(a);
        const Tensor<T>& vb = val(bias);
        const int n = vb.dim(0);
        if (va.shape.back() != n) throw contract_error("add_bias: width mismatch");
        Tensor<T> out = Tensor<T>::uninit(va.shape);
        const int64_t rows = va.numel() / n;
        const T* pa = va.ptr();
        const T* pb = vb.ptr();
        T* po = out.ptr();
#pragma omp parallel for schedule(static) if (rows > 256)
        for (int64_t r = 0; r < rows; ++r)
            for (int j = 0; j < n; ++j) po[r * n + j] = pa[r * n + j] + pb[j];
        return push(std::move(out), {a, bias}, [n, rows](Tape& t, int id) {
            const Tensor<T>& dy = t.nodes_[id].grad;
            t.accum_same(t.parent(id, 0), dy, T(1));
            const int pb_ = t.parent(id, 1);
            if (t.wants(pb_)) {
                T* g = t.ensure_grad(pb_).ptr();
                const T* d = dy.ptr();
                for (int64_t r = 0; r < rows; ++r)
                    for (int j = 0; j < n; ++j) g[j] += d[r * n + j];
            }
        });
    }

    /// Grouped matmul: A[g,m,k] x B[g,k,n]
    int bmm(int a, int b) {
        const Tensor<T>& va = val(a);
        const Tensor<T>& vb = val(b);
        if (va.ndim() != 3 || vb.ndim() != 3 || va.dim(0) != vb.dim(0) || va.dim(2) != vb.dim(1))
            throw contract_error("bmm: shape mismatch");
        const int g = va.dim(0), m = va.dim(1), k = va.dim(2), n = vb.dim(2);
        Tensor<T> out = Tensor<T>::uninit({g, m, n});
        kernels::bmm_nn(va.ptr(), vb.ptr(), out.ptr(), g, m, k, n);
        return push(std::move(out), {a, b}, [g, m, k, n](Tape& t, int id) {
            const T* dy = t.nodes_[id].grad.ptr();
            const int pa = t.parent(id, 0), pb = t.parent(id, 1);
            if (t.wants(pa))
                kernels::bmm_nt<T, true>(dy, t.val(pb).ptr(), t.ensure_grad(pa).ptr(), g, m, n, k);
            if (t.wants(pb))
                kernels::bmm_tn<T, true>(t.val(pa).ptr(), dy, t.ensure_grad(pb).ptr(), g, m, k, n);
        });
    }

    /// Grouped matmul with transposed rhs: A[g,m,k] x B[g,n,k]^T
    int bmm_nt(int a, int b) {
        const Tensor<T>& va = val(a);
        const Tensor<T>& vb = val(b);
        if (va.ndim() != 3 || vb.ndim() != 3 || va.dim(0) != vb.dim(0) || va.dim(2) != vb.dim(2))
            throw contract_error("bmm_nt: shape mismatch");
        const int g = va.dim(0), m = va.dim(1), k = va.dim(2), n = vb.dim(1);
        Tensor<T> out = Tensor<T>::uninit({g, m, n});
        kernels::bmm_nt(va.ptr(), vb.ptr(), out.ptr(), g, m, k, n);
        return push(std::move(out), {a, b}, [g, m, k, n](Tape& t, int id) {
            const T* dy = t.nodes_[id].grad.ptr();
            const int pa = t.parent(id, 0), pb = t.parent(id, 1);
            if (t.wants(pa))
                kernels::bmm_nn<T, true>(dy, t.val(pb).ptr(), t.ensure_grad(pa).ptr(), g, m, n, k);
            if (t.wants(pb))
                kernels::bmm_tn<T, true>(dy, t.val(pa).ptr(), t.ensure_grad(pb).ptr(), g, m, n, k);
        });
    }

    // ----- shape -----

    int reshape(int a, std::vector<int> shape) {
        if (Tensor<T>::count(shape) != val(a).numel()) throw contract_error("reshape: element count mismatch");
        Tensor<T> out{std::move(shape), val(a).data};
        return push(std::move(out), {a}, [](Tape& t, int id) {
            t.accum_same(t.parent(id, 0), t.nodes_[id].grad, T(1));
        });
    }

    /// [A,B,C,D] -> [A,C,B,D]
    int permute_0213(int a) {
        const Tensor<T>& va = val(a);
        if (va.ndim() != 4) throw contract_error("permute_0213: expects rank 4");
        const int A = va.dim(0), B = va.dim(1), C = va.dim(2), D = va.dim(3);
        Tensor<T> out = Tensor<T>::uninit({A, C, B, D});
        detail::permute_0213(va.ptr(), out.ptr(), A, B, C, D, false);
        return push(std::move(out), {a}, [A, B, C, D](Tape& t, int id) {
            const int pa = t.parent(id, 0);
            if (!t.wants(pa)) return;
            detail::permute_0213(t.nodes_[id].grad.ptr(), t.ensure_grad(pa).ptr(), A, C, B, D, true);
        });
    }

    /// [B,n,d] -> [B,len,d], tokens [start, start+len)
    int slice_dim1(int a, int start, int len) {
        const Tensor<T>& va = val(a);
        const int B = va.dim(0), n = va.dim(1), d = va.dim(2);
        if (start < 0 || start + len > n) throw contract_error("slice_dim1: out of range");
        Tensor<T> out = Tensor<T>::uninit({B, len, d});
        for (int b = 0; b < B; ++b)
            std::copy_n(va.ptr() + (static_cast<int64_t>(b) * n + start) * d, static_cast<int64_t>(len) * d,
                        out.ptr() + static_cast<int64_t>(b) * len * d);
        return push(std::move(out), {a}, [B, n, d, start, len](Tape& t, int id) {
            const int pa = t.parent(id, 0);
            if (!t.wants(pa)) return;
            T* g = t.ensure_grad(pa).ptr();
            const T* dy = t.nodes_[id].grad.ptr();
            for (int b = 0; b < B; ++b) {
                T* dst = g + (static_cast<int64_t>(b) * n + start) * d;
                const T* src = dy + static_cast<int64_t>(b) * len * d;
                for (int64_t i = 0; i < static_cast<int64_t>(len) * d; ++i) dst[i] += src[i];
            }
        });
    }

    /// Concatenates [B,n_i,d] blocks along dim 1.
    int concat_dim1(const std::vector<int>& parts) {
        if (parts.empty()) throw contract_error("concat_dim1: no parts");
        const int B = val(parts[0]).dim(0), d = val(parts[0]).dim(2);
        int total = 0;
        for (int p : parts) {
            if (val(p).ndim() != 3 || val(p).dim(0) != B || val(p).dim(2) != d)
                throw contract_error("concat_dim1: shape mismatch");
            total += val(p).dim(1);
        }
        Tensor<T> out = Tensor<T>::uninit({B, total, d});
        int off = 0;
        for (int p : parts) {
            const Tensor<T>& vp = val(p);
            const int n = vp.dim(1);
            for (int b = 0; b < B; ++b)
                std::copy_n(vp.ptr() + static_cast<int64_t>(b) * n * d, static_cast<int64_t>(n) * d,
                            out.ptr() + (static_cast<int64_t>(b) * total + off) * d);
            off += n;
        }
        std::vector<int> ps = parts;
        return push(std::move(out), parts, [B, d, total, ps](Tape& t, int id) {
            const T* dy = t.nodes_[id].grad.ptr();
            int off2 = 0;
            for (int p : ps) {
                const int n = t.val(p).dim(1);
                if (t.wants(p)) {
                    T* g = t.ensure_grad(p).ptr();
                    for (int b = 0; b < B; ++b) {
                        const T* src = dy + (static_cast<int64_t>(b) * total + off2) * d;
                        T* dst = g + static_cast<int64_t>(b) * n * d;
                        for (int64_t i = 0; i < static_cast<int64_t>(n) * d; ++i) dst[i] += src[i];
                    }
                }
                off2 += n;
            }
        });
    }

    // ----- normalization / activations over rows -----

    /// softmax(pre_scale * x) over the last dimension.
    int softmax(int a, T pre_scale = T(1)) {
        const Tensor<T>& va = val(a);
        const int cols = va.shape.back();
        const int64_t rows = va.numel() / cols;
        Tensor<T> out = Tensor<T>::uninit(va.shape);
        const T* px = va.ptr();
        T* po = out.ptr();
#pragma omp parallel for schedule(static) if (rows > 64)
        for (int64_t r = 0; r < rows; ++r) {
            const T* xr = px + r * cols;
            T* yr = po + r * cols;
            T mx = pre_scale * xr[0];
            for (int j = 1; j < cols; ++j) mx = std::max(mx, pre_scale * xr[j]);
#pragma omp simd
            for (int j = 0; j < cols; ++j) yr[j] = fastmath::fast_exp(pre_scale * xr[j] - mx);
            T sum = T(0);
            for (int j = 0; j < cols; ++j) sum += yr[j];
            const T inv = T(1) / sum;
            for (int j = 0; j < cols; ++j) yr[j] *= inv;
        }
        return push(std::move(out), {a}, [rows, cols, pre_scale](Tape& t, int id) {
            const int pa = t.parent(id, 0);
            if (!t.wants(pa)) return;
            T* g = t.ensure_grad(pa).ptr();
            const T* y = t.nodes_[id].val.ptr();
            const T* dy = t.nodes_[id].grad.ptr();
#pragma omp parallel for schedule(static) if (rows > 64)
            for (int64_t r = 0; r < rows; ++r) {
                const T* yr = y + r * cols;
                const T* dr = dy + r * cols;
                T dot = T(0);
                for (int j = 0; j < cols; ++j) dot += dr[j] * yr[j];
                T* gr = g + r * cols;
                for (int j = 0; j < cols; ++j) gr[j] += pre_scale * (dr[j] - dot) * yr[j];
            }
        });
    }

    /// Layer norm over the last dimension with affine (gamma, beta).
    int layer_norm(int x, int gamma, int beta, T eps = T(1e-5)) {
        const Tensor<T>& vx = val(x);
        const int d = vx.shape.back();
        if (val(gamma).numel() != d || val(beta).numel() != d)
            throw contract_error("layer_norm: affine width mismatch");
        const int64_t rows = vx.numel() / d;
        Tensor<T> out = Tensor<T>::uninit(vx.shape);
        auto aux = std::make_shared<std::vector<T>>(static_cast<size_t>(rows) * 2);  // mean, istd per row
        const T* px = vx.ptr();
        const T* pg = val(gamma).ptr();
        const T* pb = val(beta).ptr();
        T* po = out.ptr();
        T* pa = aux->data();
#pragma omp parallel for schedule(static) if (rows > 64)
        for (int64_t r = 0; r < rows; ++r) {
            const T* xr = px + r * d;
            T mean = T(0);
            for (int j = 0; j < d; ++j) mean += xr[j];
            mean /= T(d);
            T var = T(0);
            for (int j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
            var /= T(d);
            const T istd = T(1) / std::sqrt(var + eps);
            pa[2 * r] = mean;
            pa[2 * r + 1] = istd;
            T* yr = po + r * d;
            for (int j = 0; j < d; ++j) yr[j] = pg[j] * (xr[j] - mean) * istd + pb[j];
        }
        return push(std::move(out), {x, gamma, beta}, [rows, d, aux](Tape& t, int id) {
            const int px_ = t.parent(id, 0), pg_ = t.parent(id, 1), pb_ = t.parent(id, 2);
            const T* xv = t.val(px_).ptr();
            const T* gv = t.val(pg_).ptr();
            const T* dy = t.nodes_[id].grad.ptr();
            const T* pa2 = aux->data();
            if (t.wants(px_)) {
                T* gx = t.ensure_grad(px_).ptr();
#pragma omp parallel for schedule(static) if (rows > 64)
                for (int64_t r = 0; r < rows; ++r) {
                    const T mean = pa2[2 * r], istd = pa2[2 * r + 1];
                    const T* xr = xv + r * d;
                    const T* dr = dy + r * d;
                    T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
                    for (int j = 0; j < d; ++j) {
                        const T xhat = (xr[j] - mean) * istd;
                        const T dxhat = dr[j] * gv[j];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                    }
                    T* gr = gx + r * d;
                    for (int j = 0; j < d; ++j) {
                        const T xhat = (xr[j] - mean) * istd;
                        const T dxhat = dr[j] * gv[j];
                        gr[j] += istd * (dxhat - sum_dxhat / T(d) - xhat * sum_dxhat_xhat / T(d));
                    }
                }
            }
            if (t.wants(pg_)) {
                T* gg = t.ensure_grad(pg_).ptr();
                for (int64_t r = 0; r < rows; ++r) {
                    const T mean = pa2[2 * r], istd = pa2[2 * r + 1];
                    const T* xr = xv + r * d;
                    const T* dr = dy + r * d;
                    for (int j = 0; j < d; ++j) gg[j] += dr[j] * (xr[j] - mean) * istd;
                }
            }
            if (t.wants(pb_)) {
                T* gb = t.ensure_grad(pb_).ptr();
                for (int64_t r = 0; r < rows; ++r) {
                    const T* dr = dy + r * d;
                    for (int j = 0; j < d; ++j) gb[j] += dr[j];
                }
            }
        });
    }

    // ----- convolution -----

    /// x[B,Ci,L] (*) w[Co,Ci,K] + bias[Co], stride/pad as given. Lowered to
    /// im2col + matmul; the patch matrix is kept for the backward pass.
    int conv1d(int x, int w, int bias, int stride, int pad) {
        const Tensor<T>& vx = val(x);
        const Tensor<T>& vw = val(w);
        const int B = vx.dim(0), ci = vx.dim(1), li = vx.dim(2);
        const int co = vw.dim(0), k = vw.dim(2);
        if (vw.dim(1) != ci) throw contract_error("conv1d: channel mismatch");
        const int lo = (li + 2 * pad - k) / stride + 1;
        if (lo <= 0) throw contract_error("conv1d: empty output");
        const int ck = ci * k;
        const int64_t rows = static_cast<int64_t>(B) * lo;

        auto cols = std::make_shared<Tensor<T>>(Tensor<T>::uninit({static_cast<int>(rows), ck}));
        {
            const T* px = vx.ptr();
            T* pc = cols->ptr();
#pragma omp parallel for schedule(static) if (rows > 256)
            for (int64_t r = 0; r < rows; ++r) {
                const int b = static_cast<int>(r / lo);
                const int ol = static_cast<int>(r % lo);
                const int base = ol * stride - pad;
                T* crow = pc + r * ck;
                for (int ic = 0; ic < ci; ++ic) {
                    const T* xrow = px + (static_cast<int64_t>(b) * ci + ic) * li;
                    for (int kk = 0; kk < k; ++kk) {
                        const int il = base + kk;
                        crow[ic * k + kk] = (il >= 0 && il < li) ? xrow[il] : T(0);
                    }
                }
            }
        }
        // weights as [ci*k, co]
        Tensor<T> w2 = Tensor<T>::uninit({ck, co});
        {
            const T* pw = vw.ptr();
            for (int oc = 0; oc < co; ++oc)
                for (int j = 0; j < ck; ++j) w2.data[static_cast<size_t>(j) * co + oc] = pw[static_cast<int64_t>(oc) * ck + j];
        }
        Tensor<T> y2 = Tensor<T>::uninit({static_cast<int>(rows), co});
        kernels::matmul_nn_bias(cols->ptr(), w2.ptr(), val(bias).ptr(), y2.ptr(), static_cast<int>(rows), ck, co);
        Tensor<T> out = Tensor<T>::uninit({B, co, lo});
        detail::permute_0213(y2.ptr(), out.ptr(), B, lo, co, 1, false);  // [B,lo,co] -> [B,co,lo]

        return push(std::move(out), {x, w, bias},
                    [B, ci, li, co, k, stride, pad, lo, ck, rows, cols](Tape& t, int id) {
            const int px_ = t.parent(id, 0), pw_ = t.parent(id, 1), pb_ = t.parent(id, 2);
            // dy back to row-major patches [B*lo, co]
            Tensor<T> dy2 = Tensor<T>::uninit({static_cast<int>(rows), co});
            detail::permute_0213(t.nodes_[id].grad.ptr(), dy2.ptr(), B, co, lo, 1, false);
            if (t.wants(pw_)) {
                // dW2 = cols^T dy2, scattered back into [co, ci, k]
                Tensor<T> dw2 = Tensor<T>::uninit({ck, co});
                kernels::matmul_tn(cols->ptr(), dy2.ptr(), dw2.ptr(), static_cast<int>(rows), ck, co);
                T* g = t.ensure_grad(pw_).ptr();
#pragma omp parallel for schedule(static) if (co > 8)
                for (int oc = 0; oc < co; ++oc)
                    for (int j = 0; j < ck; ++j)
                        g[static_cast<int64_t>(oc) * ck + j] += dw2.data[static_cast<size_t>(j) * co + oc];
            }
            if (t.wants(pb_)) {
                T* g = t.ensure_grad(pb_).ptr();
                const T* d = dy2.ptr();
                for (int64_t r = 0; r < rows; ++r)
                    for (int oc = 0; oc < co; ++oc) g[oc] += d[r * co + oc];
            }
            if (t.wants(px_)) {
                // dcols = dy2 W2^T; W2 rebuilt from the weight values
                const T* pw = t.val(pw_).ptr();
                Tensor<T> w2b = Tensor<T>::uninit({ck, co});
                for (int oc = 0; oc < co; ++oc)
                    for (int j = 0; j < ck; ++j)
                        w2b.data[static_cast<size_t>(j) * co + oc] = pw[static_cast<int64_t>(oc) * ck + j];
                Tensor<T> dcols = Tensor<T>::uninit({static_cast<int>(rows), ck});
                kernels::matmul_nt(dy2.ptr(), w2b.ptr(), dcols.ptr(), static_cast<int>(rows), co, ck);
                // col2im gather-add: each dx element sums its patch entries
                T* dx = t.ensure_grad(px_).ptr();
                const T* pc = dcols.ptr();
                const int64_t xrows = static_cast<int64_t>(B) * ci;
#pragma omp parallel for schedule(static) if (xrows > 16)
                for (int64_t xr = 0; xr < xrows; ++xr) {
                    const int b = static_cast<int>(xr / ci);
                    const int ic = static_cast<int>(xr % ci);
                    T* dxrow = dx + xr * li;
                    for (int il = 0; il < li; ++il) {
                        T acc = T(0);
                        for (int kk = 0; kk < k; ++kk) {
                            const int num = il + pad - kk;
                            if (num < 0 || num % stride != 0) continue;
                            const int ol = num / stride;
                            if (ol >= lo) continue;
                            acc += pc[(static_cast<int64_t>(b) * lo + ol) * ck + ic * k + kk];
                        }
                        dxrow[il] += acc;
                    }
                }
            }
        });
    }

    // ----- model-specific assembly -----

    /// Per-scalar tokenization: x[B,P], w[P,d], b[P,d] -> [B,P,d] with
    /// tokens[bi,p,:] = x[bi,p] * w[p,:] + b[p,:].
    int scalar_tokens(int x, int w, int b) {
        const Tensor<T>& vx = val(x);
        const Tensor<T>& vw = val(w);
        const int B = vx.dim(0), P = vx.dim(1), d = vw.dim(1);
        if (vw.dim(0) != P || val(b).dim(0) != P || val(b).dim(1) != d)
            throw contract_error("scalar_tokens: shape mismatch");
        Tensor<T> out = Tensor<T>::uninit({B, P, d});
        const T* px = vx.ptr();
        const T* pw = vw.ptr();
        const T* pb = val(b).ptr();
        T* po = out.ptr();
#pragma omp parallel for schedule(static) if (B > 32)
        for (int bi = 0; bi < B; ++bi)
            for (int p = 0; p < P; ++p) {
                const T xv = px[static_cast<int64_t>(bi) * P + p];
                const T* wr = pw + static_cast<int64_t>(p) * d;
                const T* br = pb + static_cast<int64_t>(p) * d;
                T* orow = po + (static_cast<int64_t>(bi) * P + p) * d;
                for (int j = 0; j < d; ++j) orow[j] = xv * wr[j] + br[j];
            }
        return push(std::move(out), {x, w, b}, [B, P, d](Tape& t, int id) {
            const T* dy = t.nodes_[id].grad.ptr();
            const int px_ = t.parent(id, 0), pw_ = t.parent(id, 1), pb_ = t.parent(id, 2);
            const T* xv = t.val(px_).ptr();
            if (t.wants(pw_)) {
                T* gw = t.ensure_grad(pw_).ptr();
#pragma omp parallel for schedule(static) if (P > 16)
                for (int p = 0; p < P; ++p)
                    for (int bi = 0; bi < B; ++bi) {
                        const T xvv = xv[static_cast<int64_t>(bi) * P + p];
                        const T* dr = dy + (static_cast<int64_t>(bi) * P + p) * d;
                        T* gr = gw + static_cast<int64_t>(p) * d;
                        for (int j = 0; j < d; ++j) gr[j] += xvv * dr[j];
                    }
            }
            if (t.wants(pb_)) {
                T* gb = t.ensure_grad(pb_).ptr();
#pragma omp parallel for schedule(static) if (P > 16)
                for (int p = 0; p < P; ++p)
                    for (int bi = 0; bi < B; ++bi) {
                        const T* dr = dy + (static_cast<int64_t>(bi) * P + p) * d;
                        T* gr = gb + static_cast<int64_t>(p) * d;
                        for (int j = 0; j < d; ++j) gr[j] += dr[j];
                    }
            }
            if (t.wants(px_)) {
                T* gx = t.ensure_grad(px_).ptr();
                const T* wv = t.val(pw_).ptr();
                for (int bi = 0; bi < B; ++bi)
                    for (int p = 0; p < P; ++p) {
                        const T* dr = dy + (static_cast<int64_t>(bi) * P + p) * d;
                        const T* wr = wv + static_cast<int64_t>(p) * d;
                        T acc = T(0);
                        for (int j = 0; j < d; ++j) acc += dr[j] * wr[j];
                        gx[static_cast<int64_t>(bi) * P + p] += acc;
                    }
            }
        });
    }

    /// [B,n,d] + v[d], broadcast over batch and tokens.
    int add_vec(int a, int v) {
        const Tensor<T>& va = val(a);
        const int d = va.shape.back();
        if (val(v).numel() != d) throw contract_error("add_vec: width mismatch");
        Tensor<T> out = Tensor<T>::uninit(va.shape);
        const int64_t rows = va.numel() / d;
        const T* pa = va.ptr();
        const T* pv = val(v).ptr();
        T* po = out.ptr();
        for (int64_t r = 0; r < rows; ++r)
            for (int j = 0; j < d; ++j) po[r * d + j] = pa[r * d + j] + pv[j];
        return push(std::move(out), {a, v}, [rows, d](Tape& t, int id) {
            const Tensor<T>& dy = t.nodes_[id].grad;
            t.accum_same(t.parent(id, 0), dy, T(1));
            const int pv_ = t.parent(id, 1);
            if (t.wants(pv_)) {
                T* g = t.ensure_grad(pv_).ptr();
                const T* dr = dy.ptr();
                for (int64_t r = 0; r < rows; ++r)
                    for (int j = 0; j < d; ++j) g[j] += dr[r * d + j];
            }
        });
    }

    /// [B,n,d] -> [B,d], mean over tokens.
    int mean_dim1(int a) {
        const Tensor<T>& va = val(a);
        const int B = va.dim(0), n = va.dim(1), d = va.dim(2);
        Tensor<T> out = Tensor<T>::zeros({B, d});
        const T* p = va.ptr();
        T* po = out.ptr();
        for (int b = 0; b < B; ++b)
            for (int t2 = 0; t2 < n; ++t2)
                for (int j = 0; j < d; ++j)
                    po[static_cast<int64_t>(b) * d + j] += p[(static_cast<int64_t>(b) * n + t2) * d + j] / T(n);
        return push(std::move(out), {a}, [B, n, d](Tape& t, int id) {
            const int pa = t.parent(id, 0);
            if (!t.wants(pa)) return;
            T* g = t.ensure_grad(pa).ptr();
            const T* dy = t.nodes_[id].grad.ptr();
            for (int b = 0; b < B; ++b)
                for (int t2 = 0; t2 < n; ++t2)
                    for (int j = 0; j < d; ++j)
                        g[(static_cast<int64_t>(b) * n + t2) * d + j] += dy[static_cast<int64_t>(b) * d + j] / T(n);
        });
    }

    // ----- reductions -----

    int sum_all(int a) {
        const Tensor<T>& va = val(a);
        T s = T(0);
        const T* p = va.ptr();
        for (int64_t i = 0; i < va.numel(); ++i) s += p[i];
        return push(Tensor<T>({1}, {s}), {a}, [](Tape& t, int id) {
            const T g = t.nodes_[id].grad.data[0];
            const int pa = t.parent(id, 0);
            if (!t.wants(pa)) return;
            Tensor<T>& ga = t.ensure_grad(pa);
            ew(ga.numel(), [&](int64_t i, T* gp) { gp[i] += g; }, ga.ptr());
        });
    }

    /// Mean squared error between same-shape tensors -> scalar.
    int mse(int a, int b) {
        check_same(a, b, "mse");
        const Tensor<T>& va = val(a);
        const Tensor<T>& vb = val(b);
        const int64_t n = va.numel();
        T s = T(0);
        for (int64_t i = 0; i < n; ++i) {
            const T d = va.data[static_cast<size_t>(i)] - vb.data[static_cast<size_t>(i)];
            s += d * d;
        }
        return push(Tensor<T>({1}, {s / T(n)}), {a, b}, [n](Tape& t, int id) {
            const T g = t.nodes_[id].grad.data[0] * T(2) / T(n);
            const int pa = t.parent(id, 0), pb = t.parent(id, 1);
            const T* av = t.val(pa).ptr();
            const T* bv = t.val(pb).ptr();
            if (t.wants(pa)) {
                T* ga = t.ensure_grad(pa).ptr();
                ew(n, [&](int64_t i, T* gp) { gp[i] += g * (av[i] - bv[i]); }, ga);
            }
            if (t.wants(pb)) {
                T* gb = t.ensure_grad(pb).ptr();
                ew(n, [&](int64_t i, T* gp) { gp[i] -= g * (av[i] - bv[i]); }, gb);
            }
        });
    }

    // ----- backward -----

    void backward(int root) {
        Node& r = nodes_[static_cast<size_t>(root)];
        if (r.val.numel() != 1) throw contract_error("backward: root must be scalar");
        r.grad = Tensor<T>({1}, {T(1)});
        for (int id = root; id >= 0; --id) {
            Node& n = nodes_[static_cast<size_t>(id)];
            if (n.back && !n.grad.empty()) n.back(*this, id);
        }
    }

    Tensor<T>& ensure_grad(int id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.grad.empty()) n.grad = Tensor<T>::zeros(n.val.shape);
        return n.grad;
    }

  private:
    struct Parents {
        std::vector<int> ids;
    };

    template <typename F>
    static void ew(int64_t n, F f, T* out) {
#pragma omp parallel for schedule(static) if (n > 16384)
        for (int64_t i = 0; i < n; ++i) f(i, out);
    }

    template <typename F>
    static void ew_simd(int64_t n, F f, T* out) {
#pragma omp parallel for simd schedule(static) if (n > 16384)
        for (int64_t i = 0; i < n; ++i) f(i, out);
    }

    void check_same(int a, int b, const char* op) const {
        if (!val(a).same_shape(val(b)))
            throw contract_error(std::string(op) + ": shape mismatch " + shape_str(val(a).shape) + " vs " +
                                 shape_str(val(b).shape));
    }

    bool wants(int id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }

    int parent(int id, int slot) const { return parents_[static_cast<size_t>(id)].ids[static_cast<size_t>(slot)]; }

    /// dst.grad += factor * src, shapes equal.
    void accum_same(int id, const Tensor<T>& src, T factor) {
        if (!wants(id)) return;
        Tensor<T>& g = ensure_grad(id);
        const T* s = src.ptr();
        if (factor == T(1))
            ew(g.numel(), [&](int64_t i, T* gp) { gp[i] += s[i]; }, g.ptr());
        else
            ew(g.numel(), [&](int64_t i, T* gp) { gp[i] += factor * s[i]; }, g.ptr());
    }

    int push(Tensor<T> out, std::vector<int> parents, std::function<void(Tape&, int)> back) {
        bool any = false;
        for (int p : parents) any = any || nodes_[static_cast<size_t>(p)].needs_grad;
        Node n;
        n.val = std::move(out);
        n.needs_grad = any;
        if (any) n.back = std::move(back);
        nodes_.push_back(std::move(n));
        parents_.push_back(Parents{std::move(parents)});
        return static_cast<int>(nodes_.size()) - 1;
    }

    std::vector<Node> nodes_;
    std::vector<Parents> parents_;
};

}  // namespace jcdi

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace jcdi::kernels {

// Dense kernels used by the network stack. Parallel versions distribute
// whole output rows across threads; every output element is accumulated by
// exactly one thread in ascending reduction order, so results are
// bit-identical for any thread count. The serial namespace holds the
// reference implementations used by the correctness tests and the benchmark.

namespace serial {

/// C[m,n] = A[m,k] * B[k,n]; Acc accumulates into C instead of overwriting.
template <typename T, bool Acc = false>
void matmul_nn(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<int64_t>(i) * n;
        if constexpr (!Acc) std::fill(crow, crow + n, T(0));
        const T* arow = a + static_cast<int64_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

/// C[m,n] = A[r,m]^T * B[r,n]
template <typename T, bool Acc = false>
void matmul_tn(const T* a, const T* b, T* c, int r, int m, int n) {
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<int64_t>(i) * n;
        if constexpr (!Acc) std::fill(crow, crow + n, T(0));
        for (int p = 0; p < r; ++p) {
            const T av = a[static_cast<int64_t>(p) * m + i];
            const T* brow = b + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

/// C[m,n] = A[m,k] * B[n,k]^T
template <typename T, bool Acc = false>
void matmul_nt(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<int64_t>(i) * k;
        T* crow = c + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* brow = b + static_cast<int64_t>(j) * k;
            T acc = T(0);
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            if constexpr (Acc)
                crow[j] += acc;
            else
                crow[j] = acc;
        }
    }
}

template <typename T>
void transpose2d(const T* a, T* out, int m, int n) {
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<int64_t>(j) * m + i] = a[static_cast<int64_t>(i) * n + j];
}

/// y[B,Co,Lo] = conv1d(x[B,Ci,L], w[Co,Ci,K]) + bias
template <typename T>
void conv1d_fwd(const T* x, const T* w, const T* bias, T* y, int nb, int ci, int li, int co, int k,
                int stride, int pad, int lo) {
    for (int b = 0; b < nb; ++b) {
        for (int oc = 0; oc < co; ++oc) {
            T* yrow = y + (static_cast<int64_t>(b) * co + oc) * lo;
            for (int ol = 0; ol < lo; ++ol) {
                T acc = bias ? bias[oc] : T(0);
                const int base = ol * stride - pad;
                for (int ic = 0; ic < ci; ++ic) {
                    const T* xrow = x + (static_cast<int64_t>(b) * ci + ic) * li;
                    const T* wrow = w + (static_cast<int64_t>(oc) * ci + ic) * k;
                    for (int kk = 0; kk < k; ++kk) {
                        const int il = base + kk;
                        if (il >= 0 && il < li) acc += xrow[il] * wrow[kk];
                    }
                }
                yrow[ol] = acc;
            }
        }
    }
}

template <typename T>
void softmax_rows(const T* x, T* y, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        const T* xr = x + static_cast<int64_t>(r) * cols;
        T* yr = y + static_cast<int64_t>(r) * cols;
        T mx = xr[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
        T sum = T(0);
        for (int j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        const T inv = T(1) / sum;
        for (int j = 0; j < cols; ++j) yr[j] *= inv;
    }
}

}  // namespace serial

template <typename T, bool Acc = false>
void matmul_nn(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<int64_t>(i) * n;
        if constexpr (!Acc) std::fill(crow, crow + n, T(0));
        const T* arow = a + static_cast<int64_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T, bool Acc = false>
void matmul_tn(const T* a, const T* b, T* c, int r, int m, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<int64_t>(i) * n;
        if constexpr (!Acc) std::fill(crow, crow + n, T(0));
        for (int p = 0; p < r; ++p) {
            const T av = a[static_cast<int64_t>(p) * m + i];
            const T* brow = b + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T, bool Acc = false>
void matmul_nt(const T* a, const T* b, T* c, int m, int k, int n) {
    std::vector<T> bt(static_cast<size_t>(k) * n);
    serial::transpose2d(b, bt.data(), n, k);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<int64_t>(i) * n;
        if constexpr (!Acc) std::fill(crow, crow + n, T(0));
        const T* arow = a + static_cast<int64_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = bt.data() + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
void transpose2d(const T* a, T* out, int m, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<int64_t>(j) * m + i] = a[static_cast<int64_t>(i) * n + j];
}

/// C[m,n] = A[m,k] * B[k,n] + bias[n]
template <typename T>
void matmul_nn_bias(const T* a, const T* b, const T* bias, T* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<int64_t>(i) * n;
        std::copy_n(bias, n, crow);
        const T* arow = a + static_cast<int64_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

/// Grouped C[g,m,n] = A[g,m,k] * B[g,k,n]
template <typename T, bool Acc = false>
void bmm_nn(const T* a, const T* b, T* c, int g, int m, int k, int n) {
    const int64_t rows = static_cast<int64_t>(g) * m;
#pragma omp parallel for schedule(static)
    for (int64_t row = 0; row < rows; ++row) {
        const int gi = static_cast<int>(row / m);
        const T* arow = a + row * k;
        const T* bmat = b + static_cast<int64_t>(gi) * k * n;
        T* crow = c + row * n;
        if constexpr (!Acc) std::fill(crow, crow + n, T(0));
        for (int p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = bmat + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

/// Grouped C[g,m,n] = A[g,m,k] * B[g,n,k]^T. B groups are transposed into a
/// per-thread scratch so the inner loop stays unit-stride.
template <typename T, bool Acc = false>
void bmm_nt(const T* a, const T* b, T* c, int g, int m, int k, int n) {
#pragma omp parallel
    {
        std::vector<T> bt(static_cast<size_t>(k) * n);
#pragma omp for schedule(static)
        for (int gi = 0; gi < g; ++gi) {
            serial::transpose2d(b + static_cast<int64_t>(gi) * n * k, bt.data(), n, k);
            serial::matmul_nn<T, Acc>(a + static_cast<int64_t>(gi) * m * k, bt.data(),
                                      c + static_cast<int64_t>(gi) * m * n, m, k, n);
        }
    }
}

/// Grouped C[g,m,n] = A[g,r,m]^T * B[g,r,n]
template <typename T, bool Acc = false>
void bmm_tn(const T* a, const T* b, T* c, int g, int r, int m, int n) {
#pragma omp parallel for schedule(static)
    for (int gi = 0; gi < g; ++gi)
        serial::matmul_tn<T, Acc>(a + static_cast<int64_t>(gi) * r * m, b + static_cast<int64_t>(gi) * r * n,
                                  c + static_cast<int64_t>(gi) * m * n, r, m, n);
}

template <typename T>
void conv1d_fwd(const T* x, const T* w, const T* bias, T* y, int nb, int ci, int li, int co, int k,
                int stride, int pad, int lo) {
    const int64_t rows = static_cast<int64_t>(nb) * co;
#pragma omp parallel for schedule(static)
    for (int64_t row = 0; row < rows; ++row) {
        const int b = static_cast<int>(row / co);
        const int oc = static_cast<int>(row % co);
        T* yrow = y + row * lo;
        if (bias)
            std::fill(yrow, yrow + lo, bias[oc]);
        else
            std::fill(yrow, yrow + lo, T(0));
        for (int ic = 0; ic < ci; ++ic) {
            const T* xrow = x + (static_cast<int64_t>(b) * ci + ic) * li;
            const T* wrow = w + (static_cast<int64_t>(oc) * ci + ic) * k;
            for (int kk = 0; kk < k; ++kk) {
                const T wv = wrow[kk];
                const int off = kk - pad;
                // valid output range for this tap
                int ol0 = 0;
                while (ol0 < lo && ol0 * stride + off < 0) ++ol0;
                int ol1 = lo;
                while (ol1 > ol0 && (ol1 - 1) * stride + off >= li) --ol1;
                const T* xs = xrow + off;
                if (stride == 1) {
                    for (int ol = ol0; ol < ol1; ++ol) yrow[ol] += wv * xs[ol];
                } else {
                    for (int ol = ol0; ol < ol1; ++ol) yrow[ol] += wv * xs[static_cast<int64_t>(ol) * stride];
                }
            }
        }
    }
}

/// dx[B,Ci,L] from dy[B,Co,Lo]; gather form, one thread per (b, ic) plane.
template <typename T>
void conv1d_bwd_x(const T* dy, const T* w, T* dx, int nb, int ci, int li, int co, int k, int stride,
                  int pad, int lo) {
    const int64_t rows = static_cast<int64_t>(nb) * ci;
#pragma omp parallel for schedule(static)
    for (int64_t row = 0; row < rows; ++row) {
        const int b = static_cast<int>(row / ci);
        const int ic = static_cast<int>(row % ci);
        T* dxrow = dx + row * li;
        for (int oc = 0; oc < co; ++oc) {
            const T* dyrow = dy + (static_cast<int64_t>(b) * co + oc) * lo;
            const T* wrow = w + (static_cast<int64_t>(oc) * ci + ic) * k;
            for (int kk = 0; kk < k; ++kk) {
                const T wv = wrow[kk];
                const int off = kk - pad;
                int ol0 = 0;
                while (ol0 < lo && ol0 * stride + off < 0) ++ol0;
                int ol1 = lo;
                while (ol1 > ol0 && (ol1 - 1) * stride + off >= li) --ol1;
                T* xs = dxrow + off;
                if (stride == 1) {
                    for (int ol = ol0; ol < ol1; ++ol) xs[ol] += wv * dyrow[ol];
                } else {
                    for (int ol = ol0; ol < ol1; ++ol) xs[static_cast<int64_t>(ol) * stride] += wv * dyrow[ol];
                }
            }
        }
    }
}

/// dw[Co,Ci,K] and db[Co]; one thread per output channel. The inner
/// reductions use fixed-width simd lanes, so results are identical across
/// runs and thread counts.
template <typename T>
void conv1d_bwd_w(const T* x, const T* dy, T* dw, T* db, int nb, int ci, int li, int co, int k,
                  int stride, int pad, int lo) {
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < co; ++oc) {
        T bacc = T(0);
        for (int b = 0; b < nb; ++b) {
            const T* dyrow = dy + (static_cast<int64_t>(b) * co + oc) * lo;
#pragma omp simd reduction(+ : bacc)
            for (int ol = 0; ol < lo; ++ol) bacc += dyrow[ol];
        }
        db[oc] += bacc;
        for (int ic = 0; ic < ci; ++ic) {
            const int64_t xoff = static_cast<int64_t>(ic) * li;
            T* wrow = dw + (static_cast<int64_t>(oc) * ci + ic) * k;
            for (int kk = 0; kk < k; ++kk) {
                const int off = kk - pad;
                int ol0 = 0;
                while (ol0 < lo && ol0 * stride + off < 0) ++ol0;
                int ol1 = lo;
                while (ol1 > ol0 && (ol1 - 1) * stride + off >= li) --ol1;
                T acc = T(0);
                for (int b = 0; b < nb; ++b) {
                    const T* dyrow = dy + (static_cast<int64_t>(b) * co + oc) * lo;
                    const T* xs = x + static_cast<int64_t>(b) * ci * li + xoff + off;
                    if (stride == 1) {
#pragma omp simd reduction(+ : acc)
                        for (int ol = ol0; ol < ol1; ++ol) acc += dyrow[ol] * xs[ol];
                    } else {
#pragma omp simd reduction(+ : acc)
                        for (int ol = ol0; ol < ol1; ++ol) acc += dyrow[ol] * xs[static_cast<int64_t>(ol) * stride];
                    }
                }
                wrow[kk] += acc;
            }
        }
    }
}

template <typename T>
void softmax_rows(const T* x, T* y, int64_t rows, int cols) {
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        const T* xr = x + r * cols;
        T* yr = y + r * cols;
        T mx = xr[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
        T sum = T(0);
        for (int j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        const T inv = T(1) / sum;
        for (int j = 0; j < cols; ++j) yr[j] *= inv;
    }
}

}  // namespace jcdi::kernels

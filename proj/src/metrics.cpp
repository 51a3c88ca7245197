#include "jcdi/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "jcdi/rng.hpp"

namespace jcdi {

std::array<double, kNumParams> rpe(const ParamVector& est, const ParamVector& truth,
                                   const ParamSpace& space) {
    std::array<double, kNumParams> out{};
    for (int i = 0; i < space.size(); ++i)
        out[static_cast<size_t>(i)] = 100.0 * std::abs(est[i] - truth[i]) / space.range(i);
    return out;
}

double marpe(std::span<const double> rpes) {
    if (rpes.empty()) throw contract_error("marpe: empty input");
    double s = 0.0;
    for (double r : rpes) s += r;
    return s / static_cast<double>(rpes.size());
}

double rmse(const Trajectory& est, const Trajectory& truth) {
    if (est.size() != truth.size() || est.size() == 0) throw contract_error("rmse: size mismatch");
    const int n = est.size();
    double sp = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dp = est.p[static_cast<size_t>(i)] - truth.p[static_cast<size_t>(i)];
        const double dq = est.q[static_cast<size_t>(i)] - truth.q[static_cast<size_t>(i)];
        sp += dp * dp;
        sq += dq * dq;
    }
    return std::sqrt(sp / n) + std::sqrt(sq / n);
}

double digamma(double x) {
    // Recurrence up to the asymptotic region, then the standard series.
    double r = 0.0;
    while (x < 8.0) {
        r -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    return r + std::log(x) - 0.5 * inv -
           inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
}

namespace {

uint64_t content_seed(std::span<const double> v) {
    uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the raw bytes
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data());
    for (size_t i = 0; i < v.size() * sizeof(double); ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::vector<double> jittered(std::span<const double> v) {
    double scale = 0.0;
    for (double x : v) scale = std::max(scale, std::abs(x));
    if (scale == 0.0) scale = 1.0;
    Rng rng(content_seed(v));
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) x += (rng.uniform01() - 0.5) * 2.0 * 1e-10 * scale;
    return out;
}

bool is_constant(std::span<const double> v) {
    for (double x : v)
        if (x != v[0]) return false;
    return true;
}

}  // namespace

MiResult mutual_information(std::span<const double> x, std::span<const double> y, int k) {
    const int n = static_cast<int>(x.size());
    if (n < 100) throw contract_error("mutual_information: need at least 100 samples");
    if (static_cast<int>(y.size()) != n) throw contract_error("mutual_information: length mismatch");
    if (k < 1 || k >= n) throw contract_error("mutual_information: bad k");

    MiResult res;
    if (is_constant(x) || is_constant(y)) {
        res.degenerate_input = true;
        return res;
    }

    const std::vector<double> xj = jittered(x);
    const std::vector<double> yj = jittered(y);

    std::vector<double> psi_nx(static_cast<size_t>(n)), psi_ny(static_cast<size_t>(n));
    std::vector<int> counts(static_cast<size_t>(n), 0);

#pragma omp parallel
    {
        std::vector<double> kd(static_cast<size_t>(k));
#pragma omp for schedule(static)
        for (int i = 0; i < n; ++i) {
            // k smallest joint Chebyshev distances to other points
            std::fill(kd.begin(), kd.end(), std::numeric_limits<double>::infinity());
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const double d = std::max(std::abs(xj[static_cast<size_t>(j)] - xj[static_cast<size_t>(i)]),
                                          std::abs(yj[static_cast<size_t>(j)] - yj[static_cast<size_t>(i)]));
                if (d < kd[static_cast<size_t>(k) - 1]) {
                    int pos = k - 1;
                    while (pos > 0 && kd[static_cast<size_t>(pos - 1)] > d) {
                        kd[static_cast<size_t>(pos)] = kd[static_cast<size_t>(pos - 1)];
                        --pos;
                    }
                    kd[static_cast<size_t>(pos)] = d;
                }
            }
            const double eps = kd[static_cast<size_t>(k) - 1];
            int nx = 0, ny = 0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                if (std::abs(xj[static_cast<size_t>(j)] - xj[static_cast<size_t>(i)]) < eps) ++nx;
                if (std::abs(yj[static_cast<size_t>(j)] - yj[static_cast<size_t>(i)]) < eps) ++ny;
            }
            counts[static_cast<size_t>(i)] = nx + ny;
            psi_nx[static_cast<size_t>(i)] = digamma(nx + 1);
            psi_ny[static_cast<size_t>(i)] = digamma(ny + 1);
        }
    }

    double mean_psi = 0.0;
    double mean_count = 0.0;
    for (int i = 0; i < n; ++i) {
        mean_psi += psi_nx[static_cast<size_t>(i)] + psi_ny[static_cast<size_t>(i)];
        mean_count += 0.5 * counts[static_cast<size_t>(i)];
    }
    mean_psi /= n;
    mean_count /= n;

    const double cap = digamma(n) - digamma(k);
    double mi = digamma(k) + digamma(n) - mean_psi;
    mi = std::min(std::max(mi, 0.0), cap);
    res.nats = mi;
    // Marginal neighbor counts saturate at k when one series determines the
    // other; the estimator sits at its k-NN ceiling in that regime.
    res.perfect_dependence = mean_count <= k + 1.0;
    return res;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw contract_error("percentile: empty input");
    std::sort(values.begin(), values.end());
    const double pos = (p / 100.0) * (static_cast<double>(values.size()) - 1.0);
    const auto lo = static_cast<size_t>(std::floor(pos));
    const auto hi = static_cast<size_t>(std::ceil(pos));
    const double frac = pos - std::floor(pos);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace jcdi

#pragma once

#include <array>
#include <span>
#include <vector>

#include "jcdi/clm.hpp"
#include "jcdi/params.hpp"

namespace jcdi {

/// Range percentage error per parameter: 100 |est - truth| / (UB - LB).
std::array<double, kNumParams> rpe(const ParamVector& est, const ParamVector& truth,
                                   const ParamSpace& space);

/// Mean of the per-parameter RPEs.
double marpe(std::span<const double> rpes);

/// Trajectory error: the sum of the active- and reactive-channel RMSEs
/// (not a joint RMSE over both channels).
double rmse(const Trajectory& est, const Trajectory& truth);

double digamma(double x);

struct MiResult {
    double nats = 0.0;
    bool degenerate_input = false;   // a constant series, MI defined as 0
    bool perfect_dependence = false; // joint neighbor distances at jitter scale
};

/// Kraskov-Stoegbauer-Grassberger k-nearest-neighbor estimator (variant 1)
/// with content-derived tie-breaking jitter, so mi(x, y) == mi(y, x) to the
/// bit. Clamped into [0, digamma(n) - digamma(k)].
MiResult mutual_information(std::span<const double> x, std::span<const double> y, int k = 3);

/// Percentile with linear interpolation (p in [0, 100]).
double percentile(std::vector<double> values, double p);

}  // namespace jcdi

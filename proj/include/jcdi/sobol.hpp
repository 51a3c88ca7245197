#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "jcdi/clm.hpp"
#include "jcdi/fault.hpp"
#include "jcdi/params.hpp"
#include "jcdi/rng.hpp"

namespace jcdi {

/// Saltelli radial design over the uniform parameter box. Row layout:
/// A (N rows), B (N rows), then AB_i for i = 0..k-1 (A with column i taken
/// from B) and BA_i blocks, N*(2k+2) rows total.
struct SaltelliDesign {
    int n_base = 0;
    int k = 0;
    std::vector<double> rows;  // row-major (n_rows x k)

    int64_t n_rows() const { return static_cast<int64_t>(n_base) * (2 * k + 2); }
    const double* row(int64_t r) const { return rows.data() + r * k; }
};

SaltelliDesign saltelli_sample(const ParamSpace& space, int n_base, uint64_t seed);

/// First-order and total indices with bootstrap confidence half-widths.
struct SobolIndices {
    std::vector<double> s1, st;
    std::vector<double> s1_ci, st_ci;  // 1.96 * bootstrap std
    bool zero_variance = false;
};

/// Jansen estimators over scalar outputs laid out like the design rows;
/// n_boot resamples of the N row tuples give the confidence intervals.
/// Constant output returns all zeros with the zero_variance flag.
SobolIndices sobol_indices(std::span<const double> f, int n_base, int k, int n_boot = 100,
                           uint64_t boot_seed = 99);

/// Parameter indices sorted by descending total index; ties broken by
/// parameter name order.
std::vector<int> rank_parameters(std::span<const double> st, const ParamSpace& space);

/// Sensitivity of the fault response: the scalar functional per channel is
/// the mean squared deviation of the trajectory from its pre-fault value.
struct SobolRunResult {
    std::vector<std::string> event_labels;
    std::vector<std::array<SobolIndices, 2>> indices;  // per event: {p, q}

    /// max over the two channels, the per-event summary used for rankings.
    std::vector<double> st_max(int event) const;
};

SobolRunResult run_sobol(const ParamSpace& space, const std::vector<FaultSpec>& events,
                         const TimeGrid& grid, int n_base, uint64_t seed, int n_boot = 100);

void write_sobol_csv(const std::filesystem::path& path, const SobolRunResult& res, const ParamSpace& space);

}  // namespace jcdi

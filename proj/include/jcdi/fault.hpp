#pragma once

#include <string>
#include <vector>

#include "jcdi/errors.hpp"
#include "jcdi/rng.hpp"

namespace jcdi {

/// Output/integration grid. Powers are reported on the coarse grid; the
/// state machines and Euler integration run on the fine grid.
struct TimeGrid {
    int n_out = 512;
    double dt_out = 0.01;
    int oversample = 10;

    int n_fine() const { return (n_out - 1) * oversample + 1; }
    double dt_fine() const { return dt_out / oversample; }
    double horizon() const { return (n_out - 1) * dt_out; }
};

enum class FaultLabel { ordinary, trip, stall, custom };

std::string to_string(FaultLabel l);
FaultLabel fault_label_from_string(const std::string& s);

/// A parameterized fault-induced voltage dip at the measured bus: flat 1.0,
/// a floor of v_min for the clearing interval, then exponential recovery
/// back toward 1.0.
struct FaultSpec {
    FaultLabel label = FaultLabel::custom;
    double v_min = 1.0;           // per-unit voltage floor during the fault
    double onset_s = 0.5;         // fault application time
    double clearing_ms = 135.0;   // fault duration
    double recovery_tau_s = 0.05; // post-clearing recovery time constant

    void validate(const TimeGrid& grid) const;
};

/// The three standard disturbance classes: a shallow remote fault, a deeper
/// one that trips the electronic load, and a bolted fault that stalls
/// motor D.
FaultSpec ordinary_fault();
FaultSpec trip_fault();
FaultSpec stall_fault();
std::vector<FaultSpec> default_events();

/// A randomized event of the same class, for out-of-distribution evaluation.
/// Jitters v_min and clearing time within ranges that preserve the class
/// behavior (trip class stays below the trip threshold but above stall;
/// stall class keeps the dwell long enough to stall for all parameters).
FaultSpec randomized_fault(FaultLabel cls, Rng& rng);

struct VoltageProfile {
    std::vector<double> samples;      // n_out values on the output grid
    std::vector<double> fine_samples; // n_fine values on the integration grid
};

/// Builds the per-unit voltage trajectory for a fault. Deterministic;
/// samples[0] is always 1.0. Throws config_error if the fault does not fit
/// inside the horizon.
VoltageProfile voltage_profile(const FaultSpec& spec, const TimeGrid& grid);

}  // namespace jcdi

#pragma once

#include <vector>

#include "jcdi/fault.hpp"
#include "jcdi/params.hpp"

namespace jcdi {

/// Per-unit active/reactive power time series on the output grid.
struct Trajectory {
    std::vector<double> p, q;

    int size() const { return static_cast<int>(p.size()); }
};

struct PowerPQ {
    double p = 0.0;
    double q = 0.0;
};

/// Fixed surrogate constants that are not part of the identification vector.
/// They are recorded in every dataset manifest for reproducibility.
struct SimConstants {
    // three-phase motor surrogate
    double inertia_h = 0.3;   // s
    double rotor_r = 0.02;    // pu
    double xprime = 0.15;     // pu
    double torque_nom = 1.0;  // nominal electrical torque at V = 1
    double tp0_a = 0.1;       // motor A open-circuit time constant (fixed)
    // motor D stall / restart machine
    double v_stall = 0.6;     // pu
    double t_stall = 0.030;   // s
    double v_rst = 0.95;      // pu
    double t_rst = 0.300;     // s
    // electronic load trip characteristic
    double v_d1 = 0.8;        // pu
    double v_d2 = 0.4;        // pu
};

// ---------------------------------------------------------------------------
// Three-phase induction motor surrogate (motors A, B, C): first-order flux
// lag plus slip dynamics against a speed-dependent mechanical torque.

struct Motor3Params {
    double fraction;  // base active power at V = 1
    double ls;        // synchronous reactance (reactive draw at V = 1)
    double tp0;       // flux-lag time constant
    double etrq;      // speed exponent of the mechanical torque
};

struct Motor3State {
    double e = 1.0;      // internal voltage behind the lag
    double s = 0.0;      // slip
    double t0 = 0.0;     // mechanical torque level fixed at init
    double scale = 1.0;  // power normalization so p(V=1) = fraction
    bool slip_clamped = false;
};

/// Electrical torque at (e, s); nonsingular at s = 0.
double motor3_torque(double e, double s, const SimConstants& c);

/// Solves motor3_torque(1, s) = torque on the stable branch by bisection.
/// Residual at the returned slip is below 1e-12. Throws numerical_error if
/// the torque demand exceeds the pull-out torque (no equilibrium).
double equilibrium_slip(double torque, const SimConstants& c);

Motor3State motor3_init(const Motor3Params& mp, const SimConstants& c);
PowerPQ motor3_power(const Motor3State& st, const Motor3Params& mp, const SimConstants& c);
PowerPQ motor3_step(Motor3State& st, double v, double dt, const Motor3Params& mp, const SimConstants& c);

// ---------------------------------------------------------------------------
// Single-phase motor D: run/stall performance model. A fraction of the load
// stalls after the voltage stays below v_stall for t_stall, and a fraction
// frst of the stalled part restarts after the voltage holds above v_rst for
// t_rst.

struct MotorDParams {
    double fmd, rstall, xstall, comp_pf, frst;
    double kp1, np1, nq1, np2, nq2;
};

struct MotorDState {
    double stalled_frac = 0.0;
    int below_steps = 0;   // consecutive fine steps with V < v_stall
    int above_steps = 0;   // consecutive fine steps with V > v_rst
    bool restored = false; // restart already applied for this stall episode
};

PowerPQ motor_d_step(MotorDState& st, double v, double dt, const MotorDParams& mp, const SimConstants& c);

// ---------------------------------------------------------------------------
// Power electronic load: linear undervoltage cutoff between v_d1 and v_d2
// with partial reconnection on recovery.

enum class ElecLoadMode { nominal, tripped, recovered };

struct ElecLoadParams {
    double fel, frcel, qel0;
};

struct ElecLoadState {
    ElecLoadMode mode = ElecLoadMode::nominal;
    double v_min = 1.0;  // minimum voltage seen while tripped
    double fvl = 1.0;    // latched recovery fraction
};

/// Recovered-power fraction after a dip to v_min; clamped into [0, 1].
double fvl_rec(double v_min, double frcel, const SimConstants& c);

PowerPQ electronic_load_step(ElecLoadState& st, double v, double dt, const ElecLoadParams& ep,
                             const SimConstants& c);

// ---------------------------------------------------------------------------
// Static (ZIP) load and aggregate DER; both are algebraic in V.

PowerPQ static_zip_power(double v, double p1c, double p2c, double pf, double f_static);
PowerPQ der_a_power(double v, double fder_a, double imax, double qref);

// ---------------------------------------------------------------------------

/// Typed view of the identification vector plus the derived static fraction.
struct ClmParams {
    Motor3Params ma, mb, mc;
    MotorDParams md;
    ElecLoadParams el;
    double p1c, p2c, pf;
    double fder_a, imax, qref;
    double f_static;

    static ClmParams from(const ParamVector& p, const SimConstants& c);
};

struct SimState {
    Motor3State ma, mb, mc;
    MotorDState md;
    ElecLoadState el;
};

struct SimDiag {
    bool stalled = false;
    bool el_tripped = false;
    bool slip_clamped = false;
    int dropped_at_step = -1;
};

/// Pre-fault equilibrium at V = 1. Stepping the returned state at V = 1
/// keeps the output powers constant to within 1e-9 per step. Throws
/// numerical_error when no equilibrium slip exists.
SimState steady_state_init(const ClmParams& cp, const SimConstants& c);

PowerPQ total_power(const SimState& st, double v, const ClmParams& cp, const SimConstants& c);

struct SimResult {
    Trajectory traj;
    SimDiag diag;
};

/// Deterministic forward operator: explicit Euler on the fine grid,
/// downsampled to the output grid. Throws numerical_error (with the step
/// index in the message) if the state leaves the finite range.
SimResult simulate_full(const ParamVector& params, const VoltageProfile& profile, const TimeGrid& grid,
                        const SimConstants& c = SimConstants{});

Trajectory simulate(const ParamVector& params, const VoltageProfile& profile, const TimeGrid& grid,
                    const SimConstants& c = SimConstants{});

}  // namespace jcdi

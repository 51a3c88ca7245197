#include "jcdi/clm.hpp"

#include <cmath>
#include <string>

namespace jcdi {

double motor3_torque(double e, double s, const SimConstants& c) {
    // E^2 * (Rr/s) / ((Rr/s)^2 + X'^2), written nonsingular at s = 0.
    const double num = e * e * c.rotor_r * s;
    const double den = c.rotor_r * c.rotor_r + c.xprime * c.xprime * s * s;
    return num / den;
}

double equilibrium_slip(double torque, const SimConstants& c) {
    const double s_peak = c.rotor_r / c.xprime;  // pull-out slip
    const double t_peak = motor3_torque(1.0, s_peak, c);
    if (torque >= t_peak)
        throw numerical_error("no equilibrium slip: torque demand exceeds pull-out torque");
    double lo = 0.0, hi = s_peak;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (motor3_torque(1.0, mid, c) < torque)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-16) break;
    }
    const double s = 0.5 * (lo + hi);
    if (std::abs(motor3_torque(1.0, s, c) - torque) > 1e-12)
        throw numerical_error("equilibrium slip bisection did not converge");
    return s;
}

Motor3State motor3_init(const Motor3Params& mp, const SimConstants& c) {
    Motor3State st;
    st.e = 1.0;
    st.s = equilibrium_slip(c.torque_nom, c);
    st.t0 = c.torque_nom / std::pow(1.0 - st.s, mp.etrq);
    st.scale = 1.0 / (c.torque_nom * (1.0 - st.s));
    return st;
}

PowerPQ motor3_power(const Motor3State& st, const Motor3Params& mp, const SimConstants& c) {
    const double te = motor3_torque(st.e, st.s, c);
    PowerPQ out;
    out.p = mp.fraction * te * (1.0 - st.s) * st.scale;
    out.q = mp.fraction * (st.e * st.e / mp.ls + out.p * c.xprime * st.s / c.rotor_r);
    return out;
}

PowerPQ motor3_step(Motor3State& st, double v, double dt, const Motor3Params& mp, const SimConstants& c) {
    const double te = motor3_torque(st.e, st.s, c);
    const double tm = st.t0 * std::pow(1.0 - st.s, mp.etrq);
    st.e += dt * (v - st.e) / mp.tp0;
    st.s += dt * (tm - te) / (2.0 * c.inertia_h);
    if (st.s < 0.0) {
        st.s = 0.0;
        st.slip_clamped = true;
    } else if (st.s > 1.0) {
        st.s = 1.0;
        st.slip_clamped = true;
    }
    return motor3_power(st, mp, c);
}

static int dwell_steps(double duration, double dt) {
    return static_cast<int>(std::ceil(duration / dt - 1e-9));
}

static PowerPQ motor_d_power(const MotorDState& st, double v, const MotorDParams& mp) {
    if (mp.rstall <= 0.0 || mp.xstall <= 0.0)
        throw contract_error("motor D stall impedance must be positive");
    const double run_p = mp.fmd * (1.0 + mp.kp1 * (v - 1.0)) * std::pow(v, mp.np1);
    const double run_q = mp.fmd * std::tan(std::acos(mp.comp_pf)) * std::pow(v, mp.nq1);
    const double stall_p = mp.fmd * std::pow(v, mp.np2) / mp.rstall;
    const double stall_q = mp.fmd * std::pow(v, mp.nq2) / mp.xstall;
    const double f = st.stalled_frac;
    return {(1.0 - f) * run_p + f * stall_p, (1.0 - f) * run_q + f * stall_q};
}

PowerPQ motor_d_step(MotorDState& st, double v, double dt, const MotorDParams& mp, const SimConstants& c) {
    // run -> stall once V stays below v_stall for t_stall (dwell >= threshold
    // triggers); stall -> run restores a fraction frst after V holds above
    // v_rst for t_rst, once per stall episode.
    if (v < c.v_stall) {
        ++st.below_steps;
        st.above_steps = 0;
        if (st.below_steps >= dwell_steps(c.t_stall, dt) && st.stalled_frac < 1.0) {
            st.stalled_frac = 1.0;
            st.restored = false;
        }
    } else {
        st.below_steps = 0;
        if (v > c.v_rst) {
            ++st.above_steps;
            if (st.above_steps >= dwell_steps(c.t_rst, dt) && st.stalled_frac > 0.0 && !st.restored) {
                st.stalled_frac *= (1.0 - mp.frst);
                st.restored = true;
            }
        } else {
            st.above_steps = 0;
        }
    }
    return motor_d_power(st, v, mp);
}

double fvl_rec(double v_min, double frcel, const SimConstants& c) {
    const double raw = ((v_min - c.v_d2) + frcel * (c.v_d1 - v_min)) / (c.v_d1 - c.v_d2);
    return std::min(1.0, std::max(0.0, raw));
}

static PowerPQ electronic_load_power(const ElecLoadState& st, double v, const ElecLoadParams& ep,
                                     const SimConstants& c) {
    double ramp;
    if (v >= c.v_d1)
        ramp = 1.0;
    else if (v <= c.v_d2)
        ramp = 0.0;
    else
        ramp = (v - c.v_d2) / (c.v_d1 - c.v_d2);

    const double factor = ramp * st.fvl;
    return {ep.fel * factor, ep.fel * ep.qel0 * factor};
}

PowerPQ electronic_load_step(ElecLoadState& st, double v, double /*dt*/, const ElecLoadParams& ep,
                             const SimConstants& c) {
    switch (st.mode) {
        case ElecLoadMode::nominal:
            if (v < c.v_d1) {
                st.mode = ElecLoadMode::tripped;
                st.v_min = v;
            }
            break;
        case ElecLoadMode::tripped:
            if (v < st.v_min) st.v_min = v;
            if (v >= c.v_d1) {
                st.fvl = fvl_rec(st.v_min, ep.frcel, c);
                st.mode = ElecLoadMode::recovered;
            }
            break;
        case ElecLoadMode::recovered:
            break;  // fvl latched until end of horizon
    }
    return electronic_load_power(st, v, ep, c);
}

PowerPQ static_zip_power(double v, double p1c, double p2c, double pf, double f_static) {
    const double poly = p2c * v * v + p1c * v + (1.0 - p1c - p2c);
    return {f_static * poly, f_static * poly * std::tan(std::acos(pf))};
}

PowerPQ der_a_power(double v, double fder_a, double imax, double qref) {
    const double i_avail = v * imax;
    const double ip = std::min(1.0, i_avail);
    const double headroom = std::sqrt(std::max(0.0, i_avail * i_avail - ip * ip));
    const double sign = fder_a < 0.0 ? -1.0 : 1.0;
    return {fder_a * ip, -sign * std::min(std::abs(qref), headroom) * std::abs(fder_a)};
}

ClmParams ClmParams::from(const ParamVector& p, const SimConstants& c) {
    ClmParams cp;
    cp.ma = {p[pidx::Fma], p[pidx::LsA], c.tp0_a, p[pidx::EtrqA]};
    cp.mb = {p[pidx::Fmb], p[pidx::LsB], p[pidx::Tp0B], p[pidx::EtrqB]};
    cp.mc = {p[pidx::Fmc], p[pidx::LsC], p[pidx::Tp0C], p[pidx::EtrqC]};
    cp.md = {p[pidx::Fmd],  p[pidx::Rstall], p[pidx::Xstall], p[pidx::CompPF], p[pidx::Frst],
             p[pidx::Kp1], p[pidx::Np1],    p[pidx::Nq1],    p[pidx::Np2],    p[pidx::Nq2]};
    cp.el = {p[pidx::Fel], p[pidx::frcel], p[pidx::Qel0]};
    cp.p1c = p[pidx::P1c];
    cp.p2c = p[pidx::P2c];
    cp.pf = p[pidx::PF];
    cp.fder_a = p[pidx::FderA];
    cp.imax = p[pidx::Imax];
    cp.qref = p[pidx::Qref];
    const double fsum =
        p[pidx::Fma] + p[pidx::Fmb] + p[pidx::Fmc] + p[pidx::Fmd] + p[pidx::Fel];
    cp.f_static = std::max(0.0, 1.0 - fsum);
    return cp;
}

SimState steady_state_init(const ClmParams& cp, const SimConstants& c) {
    SimState st;
    st.ma = motor3_init(cp.ma, c);
    st.mb = motor3_init(cp.mb, c);
    st.mc = motor3_init(cp.mc, c);
    st.md = MotorDState{};
    st.el = ElecLoadState{};
    return st;
}

PowerPQ total_power(const SimState& st, double v, const ClmParams& cp, const SimConstants& c) {
    PowerPQ acc;
    auto add = [&acc](PowerPQ x) {
        acc.p += x.p;
        acc.q += x.q;
    };
    add(motor3_power(st.ma, cp.ma, c));
    add(motor3_power(st.mb, cp.mb, c));
    add(motor3_power(st.mc, cp.mc, c));
    add(motor_d_power(st.md, v, cp.md));
    add(electronic_load_power(st.el, v, cp.el, c));
    add(static_zip_power(v, cp.p1c, cp.p2c, cp.pf, cp.f_static));
    add(der_a_power(v, cp.fder_a, cp.imax, cp.qref));
    return acc;
}

SimResult simulate_full(const ParamVector& params, const VoltageProfile& profile, const TimeGrid& grid,
                        const SimConstants& c) {
    ParamSpace::clm30().require_in_bounds(params);
    if (static_cast<int>(profile.fine_samples.size()) != grid.n_fine())
        throw contract_error("voltage profile does not match the time grid");

    const ClmParams cp = ClmParams::from(params, c);
    SimState st = steady_state_init(cp, c);
    const double dt = grid.dt_fine();

    SimResult res;
    res.traj.p.resize(static_cast<size_t>(grid.n_out));
    res.traj.q.resize(static_cast<size_t>(grid.n_out));

    {
        const PowerPQ pq0 = total_power(st, profile.fine_samples[0], cp, c);
        res.traj.p[0] = pq0.p;
        res.traj.q[0] = pq0.q;
    }

    for (int i = 1; i < grid.n_fine(); ++i) {
        const double v = profile.fine_samples[static_cast<size_t>(i)];
        PowerPQ acc;
        auto add = [&acc](PowerPQ x) {
            acc.p += x.p;
            acc.q += x.q;
        };
        add(motor3_step(st.ma, v, dt, cp.ma, c));
        add(motor3_step(st.mb, v, dt, cp.mb, c));
        add(motor3_step(st.mc, v, dt, cp.mc, c));
        add(motor_d_step(st.md, v, dt, cp.md, c));
        add(electronic_load_step(st.el, v, dt, cp.el, c));
        add(static_zip_power(v, cp.p1c, cp.p2c, cp.pf, cp.f_static));
        add(der_a_power(v, cp.fder_a, cp.imax, cp.qref));

        if (!std::isfinite(acc.p) || !std::isfinite(acc.q)) {
            res.diag.dropped_at_step = i;
            throw numerical_error("simulation diverged at fine step " + std::to_string(i));
        }
        if (i % grid.oversample == 0) {
            const int k = i / grid.oversample;
            res.traj.p[static_cast<size_t>(k)] = acc.p;
            res.traj.q[static_cast<size_t>(k)] = acc.q;
        }
    }

    res.diag.stalled = st.md.stalled_frac > 0.0;
    res.diag.el_tripped = st.el.mode != ElecLoadMode::nominal;
    res.diag.slip_clamped = st.ma.slip_clamped || st.mb.slip_clamped || st.mc.slip_clamped;
    return res;
}

Trajectory simulate(const ParamVector& params, const VoltageProfile& profile, const TimeGrid& grid,
                    const SimConstants& c) {
    return simulate_full(params, profile, grid, c).traj;
}

}  // namespace jcdi

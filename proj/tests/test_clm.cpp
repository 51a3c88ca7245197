#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "jcdi/clm.hpp"
#include "jcdi/rng.hpp"

using namespace jcdi;

namespace {

ParamVector random_in_bounds(Rng& rng) {
    const ParamSpace& s = ParamSpace::clm30();
    ParamVector p;
    for (int i = 0; i < s.size(); ++i) p[i] = rng.uniform(s.lower(i), s.upper(i));
    return p;
}

double steady_tail_mean(const std::vector<double>& v) {
    double acc = 0;
    const size_t n0 = v.size() - 50;
    for (size_t i = n0; i < v.size(); ++i) acc += v[i];
    return acc / 50.0;
}

}  // namespace

TEST_CASE("voltage profile shapes") {
    const TimeGrid grid;

    SUBCASE("ordinary: floor 0.90 for the clearing interval") {
        const VoltageProfile vp = voltage_profile(ordinary_fault(), grid);
        CHECK(vp.samples[0] == 1.0);
        CHECK(vp.fine_samples[499] == 1.0);
        for (int i = 500; i < 635; ++i) CHECK(vp.fine_samples[static_cast<size_t>(i)] == doctest::Approx(0.90));
        CHECK(vp.fine_samples[700] > 0.90);
        CHECK(static_cast<int>(vp.samples.size()) == 512);
        CHECK(static_cast<int>(vp.fine_samples.size()) == grid.n_fine());
    }

    SUBCASE("stall: zero voltage during the 44 ms fault") {
        const VoltageProfile vp = voltage_profile(stall_fault(), grid);
        for (int i = 500; i < 544; ++i) CHECK(vp.fine_samples[static_cast<size_t>(i)] == 0.0);
        for (double v : vp.samples) CHECK(v >= 0.0);
    }

    SUBCASE("no disturbance when v_min = 1") {
        FaultSpec s = ordinary_fault();
        s.v_min = 1.0;
        const VoltageProfile vp = voltage_profile(s, grid);
        for (double v : vp.fine_samples) CHECK(v == 1.0);
    }

    SUBCASE("fault past the horizon is rejected") {
        FaultSpec s = ordinary_fault();
        s.clearing_ms = 6000.0;
        CHECK_THROWS_AS(voltage_profile(s, grid), config_error);
    }
}

TEST_CASE("equilibrium slip solves the torque balance") {
    const SimConstants c;
    const double s0 = equilibrium_slip(c.torque_nom, c);
    CHECK(std::abs(motor3_torque(1.0, s0, c) - c.torque_nom) <= 1e-12);
    CHECK(s0 > 0.0);
    CHECK(s0 < c.rotor_r / c.xprime);
    // demand above the pull-out torque has no solution
    CHECK_THROWS_AS(equilibrium_slip(4.0, c), numerical_error);
}

TEST_CASE("steady state holds at V = 1") {
    const TimeGrid grid;
    const SimConstants c;
    const ParamSpace& space = ParamSpace::clm30();

    SUBCASE("defaults: p(0) equals the sum of component set-points") {
        const ParamVector p = space.defaults();
        const ClmParams cp = ClmParams::from(p, c);
        const SimState st = steady_state_init(cp, c);
        const PowerPQ pq = total_power(st, 1.0, cp, c);
        const double fsum = p[pidx::Fma] + p[pidx::Fmb] + p[pidx::Fmc] + p[pidx::Fmd] + p[pidx::Fel];
        const double expect = fsum + cp.f_static + p[pidx::FderA];
        CHECK(pq.p == doctest::Approx(expect).epsilon(1e-12));
    }

    SUBCASE("flat trajectories at V = 1 for random in-bounds parameters") {
        FaultSpec flat;
        flat.label = FaultLabel::custom;
        flat.v_min = 1.0;
        const VoltageProfile vp = voltage_profile(flat, grid);
        Rng rng(42);
        for (int trial = 0; trial < 10; ++trial) {
            const ParamVector p = trial == 0 ? space.defaults() : random_in_bounds(rng);
            const Trajectory tr = simulate(p, vp, grid, c);
            double dev = 0;
            for (int i = 0; i < tr.size(); ++i) {
                dev = std::max(dev, std::abs(tr.p[static_cast<size_t>(i)] - tr.p[0]));
                dev = std::max(dev, std::abs(tr.q[static_cast<size_t>(i)] - tr.q[0]));
            }
            CHECK(dev <= 1e-9);
        }
    }
}

TEST_CASE("three-phase motor surrogate") {
    const SimConstants c;
    Motor3Params mp{0.2, 1.8, 0.1, 2.0};

    SUBCASE("constant power at V = 1 from equilibrium") {
        Motor3State st = motor3_init(mp, c);
        const PowerPQ before = motor3_power(st, mp, c);
        CHECK(before.p == doctest::Approx(0.2).epsilon(1e-12));
        for (int i = 0; i < 1000; ++i) motor3_step(st, 1.0, 1e-3, mp, c);
        const PowerPQ after = motor3_power(st, mp, c);
        CHECK(std::abs(after.p - before.p) <= 1e-11);
        CHECK(std::abs(after.q - before.q) <= 1e-11);
    }

    SUBCASE("larger Ls draws less reactive power, same active power") {
        Motor3Params big = mp;
        big.ls = 2.8;
        const Motor3State s1 = motor3_init(mp, c);
        const Motor3State s2 = motor3_init(big, c);
        const PowerPQ q1 = motor3_power(s1, mp, c);
        const PowerPQ q2 = motor3_power(s2, big, c);
        CHECK(q2.q < q1.q);
        CHECK(q1.p == doctest::Approx(q2.p).epsilon(1e-12));
    }

    SUBCASE("flux lag relaxes with time constant tp0 on a 1 -> 0.9 step") {
        for (const double tp0 : {0.08, 0.1, 0.12}) {
            Motor3Params m2 = mp;
            m2.tp0 = tp0;
            Motor3State st = motor3_init(m2, c);
            // log-linear fit of e(t) - 0.9 over the first 60 ms
            std::vector<double> log_dev;
            for (int i = 0; i < 60; ++i) {
                motor3_step(st, 0.9, 1e-3, m2, c);
                log_dev.push_back(std::log(st.e - 0.9));
            }
            double sx = 0, sy = 0, sxy = 0, sxx = 0;
            const int n = static_cast<int>(log_dev.size());
            for (int i = 0; i < n; ++i) {
                const double t = (i + 1) * 1e-3;
                sx += t;
                sy += log_dev[static_cast<size_t>(i)];
                sxy += t * log_dev[static_cast<size_t>(i)];
                sxx += t * t;
            }
            const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            const double tau_fit = -1.0 / slope;
            CHECK(tau_fit == doctest::Approx(tp0).epsilon(0.02));
        }
    }
}

TEST_CASE("motor D run/stall machine") {
    const SimConstants c;
    MotorDParams mp{0.2, 0.1, 0.1, 0.98, 0.2, 0.0, 1.0, 2.0, 3.2, 2.5};

    SUBCASE("stall-state power is V^Np2 / Rstall scaled") {
        MotorDState st;
        st.stalled_frac = 1.0;
        MotorDParams unit = mp;
        unit.fmd = 1.0;
        unit.np2 = 2.0;
        MotorDState s1 = st;
        const PowerPQ pq = motor_d_step(s1, 1.0, 1e-3, unit, c);
        CHECK(pq.p == doctest::Approx(10.0).epsilon(1e-12));
        MotorDState s2 = st;
        const PowerPQ zero = motor_d_step(s2, 0.0, 1e-3, unit, c);
        CHECK(zero.p == 0.0);
        CHECK(zero.q == 0.0);
    }

    SUBCASE("dwell threshold: 29 ms holds, 30 and 31 ms stall") {
        auto run_dwell = [&](int steps_low) {
            MotorDState st;
            for (int i = 0; i < steps_low; ++i) motor_d_step(st, 0.5, 1e-3, mp, c);
            motor_d_step(st, 1.0, 1e-3, mp, c);
            return st.stalled_frac > 0.0;
        };
        CHECK_FALSE(run_dwell(29));
        CHECK(run_dwell(30));
        CHECK(run_dwell(31));
    }

    SUBCASE("restart after 300 ms above 0.95 restores frst once") {
        MotorDState st;
        for (int i = 0; i < 40; ++i) motor_d_step(st, 0.3, 1e-3, mp, c);
        CHECK(st.stalled_frac == 1.0);
        for (int i = 0; i < 299; ++i) motor_d_step(st, 0.98, 1e-3, mp, c);
        CHECK(st.stalled_frac == 1.0);
        for (int i = 0; i < 2; ++i) motor_d_step(st, 0.98, 1e-3, mp, c);
        CHECK(st.stalled_frac == doctest::Approx(0.8));
        for (int i = 0; i < 1000; ++i) motor_d_step(st, 0.98, 1e-3, mp, c);
        CHECK(st.stalled_frac == doctest::Approx(0.8));  // single-shot restore
    }

    SUBCASE("nonpositive stall impedance is rejected") {
        MotorDState st;
        MotorDParams bad = mp;
        bad.rstall = 0.0;
        CHECK_THROWS_AS(motor_d_step(st, 1.0, 1e-3, bad, c), contract_error);
    }
}

TEST_CASE("electronic load trip and recovery") {
    const SimConstants c;

    SUBCASE("recovery fraction boundary cases") {
        CHECK(fvl_rec(c.v_d1, 0.75, c) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(fvl_rec(c.v_d2, 0.75, c) == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(fvl_rec(0.5 * (c.v_d1 + c.v_d2), 0.75, c) == doctest::Approx(0.875).epsilon(1e-12));
    }

    SUBCASE("recovery fraction is nondecreasing in v_min and frcel") {
        for (double f = 0.5; f <= 0.9; f += 0.05) {
            double prev = -1;
            for (double v = 0.0; v <= 0.81; v += 0.02) {
                const double r = fvl_rec(v, f, c);
                CHECK(r >= prev);
                prev = r;
            }
        }
        for (double v = 0.0; v <= 0.81; v += 0.05) {
            double prev = -1;
            for (double f = 0.5; f <= 0.9; f += 0.02) {
                const double r = fvl_rec(v, f, c);
                CHECK(r >= prev);
                prev = r;
            }
        }
    }

    SUBCASE("latch holds after recovery") {
        ElecLoadState st;
        ElecLoadParams ep{0.2, 0.75, 0.2};
        const PowerPQ nominal = electronic_load_step(st, 1.0, 1e-3, ep, c);
        CHECK(nominal.p == doctest::Approx(0.2));
        CHECK(nominal.q == doctest::Approx(0.04));
        for (int i = 0; i < 100; ++i) electronic_load_step(st, 0.65, 1e-3, ep, c);
        const PowerPQ rec = electronic_load_step(st, 1.0, 1e-3, ep, c);
        const double expect = 0.2 * fvl_rec(0.65, 0.75, c);
        CHECK(rec.p == doctest::Approx(expect).epsilon(1e-12));
        for (int i = 0; i < 1000; ++i) electronic_load_step(st, 1.0, 1e-3, ep, c);
        const PowerPQ later = electronic_load_step(st, 1.0, 1e-3, ep, c);
        CHECK(later.p == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("static and DER components") {
    SUBCASE("ZIP polynomial") {
        const PowerPQ at1 = static_zip_power(1.0, 0.4, 0.6, 0.95, 0.3);
        CHECK(at1.p == doctest::Approx(0.3).epsilon(1e-12));
        const PowerPQ imp = static_zip_power(0.5, 0.0, 1.0, 0.95, 1.0);
        CHECK(imp.p == doctest::Approx(0.25).epsilon(1e-12));
        const PowerPQ unity = static_zip_power(0.7, 0.4, 0.6, 1.0, 1.0);
        CHECK(unity.q == doctest::Approx(0.0));
    }

    SUBCASE("DER current limit") {
        CHECK(der_a_power(1.0, -0.2, 1.2, 0.2).p == doctest::Approx(-0.2).epsilon(1e-12));
        const PowerPQ zero = der_a_power(0.0, -0.2, 1.2, 0.2);
        CHECK(zero.p == 0.0);
        CHECK(zero.q == 0.0);
        CHECK(der_a_power(0.5, -0.2, 1.2, 0.2).p == doctest::Approx(-0.12).epsilon(1e-12));
    }
}

TEST_CASE("fault signatures of the full simulator") {
    const TimeGrid grid;
    const ParamVector defaults = ParamSpace::clm30().defaults();

    SUBCASE("stall fault raises steady-state power magnitudes") {
        const SimResult res = simulate_full(defaults, voltage_profile(stall_fault(), grid), grid);
        CHECK(res.diag.stalled);
        CHECK(std::abs(steady_tail_mean(res.traj.p)) > std::abs(res.traj.p[0]));
        CHECK(std::abs(steady_tail_mean(res.traj.q)) > std::abs(res.traj.q[0]));
    }

    SUBCASE("trip fault settles below the pre-fault active power") {
        const SimResult res = simulate_full(defaults, voltage_profile(trip_fault(), grid), grid);
        CHECK(res.diag.el_tripped);
        CHECK_FALSE(res.diag.stalled);
        CHECK(steady_tail_mean(res.traj.p) < res.traj.p[0]);
    }

    SUBCASE("stall dichotomy over random in-bounds parameters") {
        Rng rng(21);
        const VoltageProfile stall_vp = voltage_profile(stall_fault(), grid);
        const VoltageProfile ord_vp = voltage_profile(ordinary_fault(), grid);
        for (int trial = 0; trial < 8; ++trial) {
            const ParamVector p = random_in_bounds(rng);
            CHECK(simulate_full(p, stall_vp, grid).diag.stalled);
            CHECK_FALSE(simulate_full(p, ord_vp, grid).diag.stalled);
        }
    }

    SUBCASE("determinism: identical inputs give bit-identical outputs") {
        const VoltageProfile vp = voltage_profile(trip_fault(), grid);
        const Trajectory a = simulate(defaults, vp, grid);
        const Trajectory b = simulate(defaults, vp, grid);
        CHECK(a.p == b.p);
        CHECK(a.q == b.q);
    }

    SUBCASE("continuity: finite-difference sensitivity stays bounded") {
        const VoltageProfile vp = voltage_profile(ordinary_fault(), grid);
        const ParamSpace& space = ParamSpace::clm30();
        const double h = 1e-6;
        for (const int idx : {pidx::LsA, pidx::Tp0B, pidx::P1c, pidx::Qel0}) {
            ParamVector hi = defaults, lo = defaults;
            hi[idx] += h;
            lo[idx] -= h;
            const Trajectory th = simulate(hi, vp, grid);
            const Trajectory tl = simulate(lo, vp, grid);
            double max_sens = 0;
            for (int i = 0; i < th.size(); ++i)
                max_sens = std::max(max_sens,
                                    std::abs(th.p[static_cast<size_t>(i)] - tl.p[static_cast<size_t>(i)]) / (2 * h));
            CHECK(max_sens < 100.0 / space.range(idx));
        }
    }

    SUBCASE("deep long fault clamps slip instead of diverging") {
        FaultSpec deep;
        deep.label = FaultLabel::custom;
        deep.v_min = 0.0;
        deep.clearing_ms = 1200.0;
        deep.recovery_tau_s = 0.05;
        const SimResult res = simulate_full(defaults, voltage_profile(deep, grid), grid);
        CHECK(res.diag.slip_clamped);
        for (double v : res.traj.p) CHECK(std::isfinite(v));
    }

    SUBCASE("out-of-bounds parameters are rejected") {
        ParamVector p = defaults;
        p[pidx::Fma] = 0.5;
        CHECK_THROWS_AS(simulate(p, voltage_profile(ordinary_fault(), grid), grid), contract_error);
    }
}

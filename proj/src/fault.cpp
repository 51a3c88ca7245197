#include "jcdi/fault.hpp"

#include <cmath>

namespace jcdi {

std::string to_string(FaultLabel l) {
    switch (l) {
        case FaultLabel::ordinary: return "ordinary";
        case FaultLabel::trip: return "trip";
        case FaultLabel::stall: return "stall";
        case FaultLabel::custom: return "custom";
    }
    return "custom";
}

FaultLabel fault_label_from_string(const std::string& s) {
    if (s == "ordinary") return FaultLabel::ordinary;
    if (s == "trip") return FaultLabel::trip;
    if (s == "stall") return FaultLabel::stall;
    if (s == "custom") return FaultLabel::custom;
    throw usage_error("unknown fault label: " + s);
}

void FaultSpec::validate(const TimeGrid& grid) const {
    if (v_min < 0.0 || v_min > 1.0) throw config_error("fault v_min must be in [0, 1]");
    if (clearing_ms <= 0.0) throw config_error("fault clearing time must be positive");
    if (onset_s <= 0.0) throw config_error("fault onset must be after t = 0");
    if (recovery_tau_s <= 0.0) throw config_error("fault recovery constant must be positive");
    if (onset_s + clearing_ms * 1e-3 > grid.horizon())
        throw config_error("fault onset + clearing time exceeds the horizon");
}

FaultSpec ordinary_fault() { return {FaultLabel::ordinary, 0.90, 0.5, 135.0, 0.05}; }
FaultSpec trip_fault() { return {FaultLabel::trip, 0.65, 0.5, 135.0, 0.15}; }
FaultSpec stall_fault() { return {FaultLabel::stall, 0.0, 0.5, 44.0, 0.25}; }

std::vector<FaultSpec> default_events() { return {ordinary_fault(), trip_fault(), stall_fault()}; }

FaultSpec randomized_fault(FaultLabel cls, Rng& rng) {
    FaultSpec s;
    s.label = cls;
    s.onset_s = 0.5;
    switch (cls) {
        case FaultLabel::ordinary:
            s.v_min = rng.uniform(0.85, 0.95);
            s.clearing_ms = rng.uniform(90.0, 200.0);
            s.recovery_tau_s = 0.05;
            break;
        case FaultLabel::trip:
            // Below the electronic-load trip threshold, above the stall one.
            s.v_min = rng.uniform(0.62, 0.75);
            s.clearing_ms = rng.uniform(90.0, 200.0);
            s.recovery_tau_s = 0.15;
            break;
        case FaultLabel::stall:
            s.v_min = rng.uniform(0.0, 0.3);
            s.clearing_ms = rng.uniform(40.0, 90.0);
            s.recovery_tau_s = 0.25;
            break;
        case FaultLabel::custom:
            throw contract_error("randomized_fault: custom has no class ranges");
    }
    return s;
}

VoltageProfile voltage_profile(const FaultSpec& spec, const TimeGrid& grid) {
    spec.validate(grid);
    const double t_on = spec.onset_s;
    const double t_clear = spec.onset_s + spec.clearing_ms * 1e-3;

    auto v_at = [&](double t) -> double {
        if (t < t_on) return 1.0;
        if (t < t_clear) return spec.v_min;
        return 1.0 - (1.0 - spec.v_min) * std::exp(-(t - t_clear) / spec.recovery_tau_s);
    };

    VoltageProfile vp;
    vp.fine_samples.resize(static_cast<size_t>(grid.n_fine()));
    const double dtf = grid.dt_fine();
    for (int i = 0; i < grid.n_fine(); ++i) vp.fine_samples[static_cast<size_t>(i)] = v_at(i * dtf);
    vp.samples.resize(static_cast<size_t>(grid.n_out));
    for (int k = 0; k < grid.n_out; ++k)
        vp.samples[static_cast<size_t>(k)] = vp.fine_samples[static_cast<size_t>(k * grid.oversample)];
    return vp;
}

}  // namespace jcdi

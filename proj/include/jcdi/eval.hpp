#pragma once

#include "json.hpp"

#include "jcdi/clm.hpp"
#include "jcdi/metrics.hpp"

namespace jcdi {

struct DistSummary {
    double mean = 0.0, p5 = 0.0, p25 = 0.0, p75 = 0.0, p95 = 0.0;
};

DistSummary summarize(std::vector<double> values);

/// Composite evaluation of a posterior sample set against a known truth:
/// per-parameter RPE summaries, MARPE, per-event trajectory RMSE of the
/// re-simulated samples, and the pairwise mutual-information matrix.
struct EvalReport {
    std::vector<DistSummary> rpe;            // per parameter
    double marpe_mean = 0.0;
    DistSummary marpe;
    std::vector<std::string> event_labels;
    std::vector<DistSummary> rmse;           // per event
    std::vector<double> mi;                  // 30 x 30 row-major, diagonal 0
    double preclip_oob_fraction = 0.0;
};

EvalReport evaluate_posterior(const std::vector<ParamVector>& samples, const ParamVector& truth,
                              const std::vector<FaultSpec>& events, const TimeGrid& grid,
                              bool with_mi = true);

/// Mean trajectory RMSE of the samples against the truth under one event.
double mean_event_rmse(const std::vector<ParamVector>& samples, const ParamVector& truth,
                       const FaultSpec& event, const TimeGrid& grid);

/// Pairwise KSG mutual information over the sample set (nats).
std::vector<double> mi_matrix(const std::vector<ParamVector>& samples);

nlohmann::json eval_report_to_json(const EvalReport& r, const ParamSpace& space);
void write_mi_csv(const std::filesystem::path& path, const std::vector<double>& mi, const ParamSpace& space);

}  // namespace jcdi

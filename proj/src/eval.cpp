#include "jcdi/eval.hpp"

#include <fstream>

namespace jcdi {

DistSummary summarize(std::vector<double> values) {
    DistSummary s;
    double acc = 0.0;
    for (double v : values) acc += v;
    s.mean = acc / static_cast<double>(values.size());
    s.p5 = percentile(values, 5);
    s.p25 = percentile(values, 25);
    s.p75 = percentile(values, 75);
    s.p95 = percentile(values, 95);
    return s;
}

double mean_event_rmse(const std::vector<ParamVector>& samples, const ParamVector& truth,
                       const FaultSpec& event, const TimeGrid& grid) {
    const VoltageProfile profile = voltage_profile(event, grid);
    const Trajectory truth_tr = simulate(truth, profile, grid);
    const int n = static_cast<int>(samples.size());
    std::vector<double> errs(static_cast<size_t>(n));
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < n; ++i)
        errs[static_cast<size_t>(i)] = rmse(simulate(samples[static_cast<size_t>(i)], profile, grid), truth_tr);
    double acc = 0.0;
    for (double e : errs) acc += e;
    return acc / n;
}

std::vector<double> mi_matrix(const std::vector<ParamVector>& samples) {
    const int n = static_cast<int>(samples.size());
    if (n < 100) throw contract_error("mi_matrix: the KSG estimator needs at least 100 samples");
    std::vector<std::vector<double>> cols(kNumParams, std::vector<double>(static_cast<size_t>(n)));
    for (int i = 0; i < kNumParams; ++i)
        for (int s = 0; s < n; ++s) cols[static_cast<size_t>(i)][static_cast<size_t>(s)] = samples[static_cast<size_t>(s)][i];

    std::vector<double> mi(kNumParams * kNumParams, 0.0);
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < kNumParams; ++i)
        for (int j = i + 1; j < kNumParams; ++j) pairs.push_back({i, j});
#pragma omp parallel for schedule(dynamic, 4)
    for (int64_t p = 0; p < static_cast<int64_t>(pairs.size()); ++p) {
        const auto [i, j] = pairs[static_cast<size_t>(p)];
        const double v = mutual_information(cols[static_cast<size_t>(i)], cols[static_cast<size_t>(j)]).nats;
        mi[static_cast<size_t>(i) * kNumParams + static_cast<size_t>(j)] = v;
        mi[static_cast<size_t>(j) * kNumParams + static_cast<size_t>(i)] = v;
    }
    return mi;
}

EvalReport evaluate_posterior(const std::vector<ParamVector>& samples, const ParamVector& truth,
                              const std::vector<FaultSpec>& events, const TimeGrid& grid, bool with_mi) {
    if (samples.empty()) throw contract_error("evaluate_posterior: no samples");
    const ParamSpace& space = ParamSpace::clm30();
    EvalReport rep;

    std::vector<std::vector<double>> rpe_per_param(kNumParams);
    std::vector<double> marpes;
    marpes.reserve(samples.size());
    for (const ParamVector& s : samples) {
        const auto r = rpe(s, truth, space);
        for (int i = 0; i < kNumParams; ++i) rpe_per_param[static_cast<size_t>(i)].push_back(r[static_cast<size_t>(i)]);
        marpes.push_back(marpe(r));
    }
    for (int i = 0; i < kNumParams; ++i) rep.rpe.push_back(summarize(rpe_per_param[static_cast<size_t>(i)]));
    rep.marpe = summarize(marpes);
    rep.marpe_mean = rep.marpe.mean;

    for (const FaultSpec& ev : events) {
        const VoltageProfile profile = voltage_profile(ev, grid);
        const Trajectory truth_tr = simulate(truth, profile, grid);
        std::vector<double> errs(samples.size());
#pragma omp parallel for schedule(dynamic, 8)
        for (int64_t i = 0; i < static_cast<int64_t>(samples.size()); ++i)
            errs[static_cast<size_t>(i)] = rmse(simulate(samples[static_cast<size_t>(i)], profile, grid), truth_tr);
        rep.event_labels.push_back(to_string(ev.label));
        rep.rmse.push_back(summarize(errs));
    }

    if (with_mi && samples.size() >= 100) rep.mi = mi_matrix(samples);
    return rep;
}

static nlohmann::json summary_to_json(const DistSummary& s) {
    return {{"mean", s.mean}, {"p5", s.p5}, {"p25", s.p25}, {"p75", s.p75}, {"p95", s.p95}};
}

nlohmann::json eval_report_to_json(const EvalReport& r, const ParamSpace& space) {
    nlohmann::json rpe_j;
    for (int i = 0; i < space.size(); ++i) rpe_j[space.name(i)] = summary_to_json(r.rpe[static_cast<size_t>(i)]);
    nlohmann::json rmse_j;
    for (size_t e = 0; e < r.event_labels.size(); ++e) rmse_j[r.event_labels[e]] = summary_to_json(r.rmse[e]);
    nlohmann::json j = {{"rpe", rpe_j},
                        {"marpe", summary_to_json(r.marpe)},
                        {"marpe_mean", r.marpe_mean},
                        {"rmse", rmse_j},
                        {"preclip_oob_fraction", r.preclip_oob_fraction}};
    if (!r.mi.empty()) {
        // full matrix lives in the CSV; the report keeps the strongest pairs
        nlohmann::json top = nlohmann::json::array();
        std::vector<std::tuple<double, int, int>> entries;
        for (int i = 0; i < space.size(); ++i)
            for (int jx = i + 1; jx < space.size(); ++jx)
                entries.push_back({r.mi[static_cast<size_t>(i) * kNumParams + static_cast<size_t>(jx)], i, jx});
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
            return std::get<0>(a) > std::get<0>(b);
        });
        for (size_t e = 0; e < std::min<size_t>(10, entries.size()); ++e) {
            const auto& [v, i, jx] = entries[e];
            top.push_back({{"pair", {space.name(i), space.name(jx)}}, {"mi_nats", v}});
        }
        j["mi_top_pairs"] = top;
    }
    return j;
}

void write_mi_csv(const std::filesystem::path& path, const std::vector<double>& mi, const ParamSpace& space) {
    if (static_cast<int64_t>(mi.size()) != static_cast<int64_t>(space.size()) * space.size())
        throw contract_error("write_mi_csv: matrix size mismatch");
    std::ofstream os(path);
    if (!os) throw data_error("cannot open " + path.string());
    os << "parameter";
    for (int i = 0; i < space.size(); ++i) os << ',' << space.name(i);
    os << '\n';
    for (int i = 0; i < space.size(); ++i) {
        os << space.name(i);
        for (int j = 0; j < space.size(); ++j)
            os << ',' << mi[static_cast<size_t>(i) * kNumParams + static_cast<size_t>(j)];
        os << '\n';
    }
}

}  // namespace jcdi

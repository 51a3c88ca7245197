// Command-line front end: simulate | gen-data | sobol | train | infer | eval.
// Every command writes a run manifest next to its outputs and skips work when
// rerun with an identical configuration and seed (unless --force).

#include <cstdio>
#include <fstream>
#include <optional>

#include "CLI11.hpp"

#include "jcdi/config.hpp"
#include "jcdi/eval.hpp"
#include "jcdi/memtune.hpp"
#include "jcdi/parallel.hpp"
#include "jcdi/sobol.hpp"

using namespace jcdi;
namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out = ".";
    uint64_t seed = 0;
    bool seed_set = false;
    bool force = false;
    int workers = 0;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--config", c.config_path, "JSON run configuration");
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_option("--seed", c.seed, "seed override")->each([&c](const std::string&) { c.seed_set = true; });
    cmd->add_flag("--force", c.force, "redo work even if outputs are up to date");
    cmd->add_option("--workers", c.workers, "worker thread count (0 = all cores)");
}

RunConfig load_or_default(const CommonOpts& c) {
    RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
    if (c.workers > 0) par::set_threads(c.workers);
    return cfg;
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
    std::ofstream os(path);
    if (!os) throw data_error("cannot write " + path.string());
    os << j.dump(2) << "\n";
}

ParamVector params_from_file(const std::string& path) {
    const ParamSpace& space = ParamSpace::clm30();
    std::ifstream is(path);
    if (!is) throw usage_error("cannot open params file: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw usage_error("params file parse error: " + std::string(e.what()));
    }
    ParamVector p = space.defaults();
    if (j.is_array()) {
        if (static_cast<int>(j.size()) != space.size())
            throw usage_error("params array must have exactly 30 entries");
        for (int i = 0; i < space.size(); ++i) p[i] = j.at(static_cast<size_t>(i)).get<double>();
    } else if (j.is_object()) {
        for (const auto& [key, value] : j.items()) p[space.index(key)] = value.get<double>();
    } else {
        throw usage_error("params file must be a JSON array or object");
    }
    space.require_in_bounds(p);
    return p;
}

const FaultSpec& find_event(const RunConfig& cfg, const std::string& label) {
    const FaultLabel l = fault_label_from_string(label);
    for (const auto& e : cfg.events)
        if (e.label == l) return e;
    throw usage_error("fault label '" + label + "' is not in the configured event list");
}

// ---------------------------------------------------------------------------

int cmd_simulate(const CommonOpts& c, const std::string& params_file, const std::string& fault,
                 bool csv) {
    const RunConfig cfg = load_or_default(c);
    const FaultSpec& spec = find_event(cfg, fault);
    const ParamVector params = params_file.empty() ? ParamSpace::clm30().defaults() : params_from_file(params_file);

    uint64_t h = config_hash(cfg) ^ fnv1a64("simulate:" + fault + ":" + params_file);
    if (!params_file.empty()) {
        std::ifstream is(params_file);
        std::string body((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
        h ^= fnv1a64(body);
    }
    const fs::path out(c.out);
    if (!c.force && run_is_up_to_date(out, "simulate", h, 0)) {
        std::printf("simulate: outputs up to date in %s\n", out.string().c_str());
        return 0;
    }

    const VoltageProfile profile = voltage_profile(spec, cfg.grid);
    const Trajectory tr = simulate(params, profile, cfg.grid);
    fs::create_directories(out);
    save_trajectory(out / ("traj_" + fault), tr, cfg.grid);
    if (csv) {
        save_trajectory_csv(out / ("traj_" + fault + ".csv"), tr, cfg.grid);
        Trajectory vp;
        vp.p = profile.samples;
        vp.q.assign(profile.samples.size(), 0.0);
        std::ofstream os(out / ("profile_" + fault + ".csv"));
        os << "t,v\n";
        for (size_t i = 0; i < profile.samples.size(); ++i)
            os << i * cfg.grid.dt_out << ',' << profile.samples[i] << '\n';
    }
    write_run_manifest(out, "simulate", h, 0, {{"fault", fault}});
    std::printf("simulate: wrote traj_%s.f32 (%d samples) to %s\n", fault.c_str(), tr.size(),
                out.string().c_str());
    return 0;
}

int cmd_gen_data(const CommonOpts& c) {
    const RunConfig cfg = load_or_default(c);
    const uint64_t seed = c.seed_set ? c.seed : cfg.dataset_seed;
    const fs::path out(c.out);
    if (!c.force && run_is_up_to_date(out, "gen-data", config_hash(cfg), seed) &&
        fs::exists(out / "manifest.json")) {
        std::printf("gen-data: dataset up to date in %s\n", out.string().c_str());
        return 0;
    }
    DatasetConfig dc;
    dc.n_records = cfg.dataset_n_records;
    dc.n_train = cfg.dataset_n_train;
    dc.events = cfg.events;
    dc.grid = cfg.grid;
    dc.seed = seed;
    const Dataset ds = generate_dataset(dc);
    save_dataset(ds, out, true);
    write_run_manifest(out, "gen-data", config_hash(cfg), seed,
                       {{"n_records", ds.n()}, {"dropped", ds.dropped}});
    std::printf("gen-data: %d records (%d train / %d test), %d resampled, -> %s\n", ds.n(), ds.n_train(),
                ds.n_test(), ds.dropped, out.string().c_str());
    return 0;
}

int cmd_sobol(const CommonOpts& c, int n_override) {
    const RunConfig cfg = load_or_default(c);
    const uint64_t seed = c.seed_set ? c.seed : cfg.sobol_seed;
    const int n_base = n_override > 0 ? n_override : cfg.sobol_n_base;
    const fs::path out(c.out);
    const uint64_t h = config_hash(cfg) ^ fnv1a64("sobol:" + std::to_string(n_base));
    if (!c.force && run_is_up_to_date(out, "sobol", h, seed)) {
        std::printf("sobol: results up to date in %s\n", out.string().c_str());
        return 0;
    }
    const ParamSpace& space = ParamSpace::clm30();
    const SobolRunResult res = run_sobol(space, cfg.events, cfg.grid, n_base, seed, cfg.sobol_n_boot);
    fs::create_directories(out);
    write_sobol_csv(out / "sobol.csv", res, space);

    nlohmann::json rankings;
    std::vector<double> cross(static_cast<size_t>(space.size()), 0.0);
    for (size_t e = 0; e < res.event_labels.size(); ++e) {
        const std::vector<double> st = res.st_max(static_cast<int>(e));
        for (int i = 0; i < space.size(); ++i)
            cross[static_cast<size_t>(i)] = std::max(cross[static_cast<size_t>(i)], st[static_cast<size_t>(i)]);
        nlohmann::json order = nlohmann::json::array();
        for (int idx : rank_parameters(st, space)) order.push_back(space.name(idx));
        rankings[res.event_labels[e]] = order;
    }
    nlohmann::json cross_order = nlohmann::json::array();
    for (int idx : rank_parameters(cross, space)) cross_order.push_back(space.name(idx));
    rankings["cross_event_max"] = cross_order;
    write_json_file(out / "rankings.json", rankings);
    write_run_manifest(out, "sobol", h, seed, {{"n_base", n_base}});
    std::printf("sobol: N=%d over %zu events -> %s\n", n_base, res.event_labels.size(),
                out.string().c_str());
    return 0;
}

std::vector<int> mode_event_ids(const std::string& mode, const Dataset& ds) {
    auto find_label = [&](FaultLabel l) {
        for (int e = 0; e < ds.n_events(); ++e)
            if (ds.cfg.events[static_cast<size_t>(e)].label == l) return e;
        throw data_error("dataset does not contain the event required by mode " +
                         std::string(to_string(l)));
    };
    if (mode == "cdi" || mode == "res-tfr") return {find_label(FaultLabel::ordinary)};
    if (mode == "jcdi") {
        std::vector<int> all(static_cast<size_t>(ds.n_events()));
        for (int e = 0; e < ds.n_events(); ++e) all[static_cast<size_t>(e)] = e;
        return all;
    }
    throw usage_error("unknown mode: " + mode + " (expected cdi | jcdi | res-tfr)");
}

void write_losses_csv(const fs::path& path, const TrainLog& log) {
    std::ofstream os(path);
    os << "epoch,train_loss,test_loss\n";
    for (const auto& e : log.epochs) os << e.epoch << ',' << e.train_loss << ',' << e.test_loss << '\n';
}

template <typename T>
int run_train(const RunConfig& cfg, const Dataset& ds, const std::string& mode, uint64_t seed,
              const fs::path& out) {
    TrainConfig tc = cfg.training;
    tc.seed = seed;
    tc.event_ids = mode_event_ids(mode, ds);

    CheckpointMeta meta;
    meta.mode = mode;
    meta.precision = cfg.precision;
    meta.sched_steps = cfg.sched_steps;
    meta.beta0 = cfg.beta0;
    meta.betaT = cfg.betaT;
    meta.seed = seed;
    for (int e : tc.event_ids) {
        meta.events.push_back(ds.cfg.events[static_cast<size_t>(e)]);
        meta.stats.push_back(ds.stats[static_cast<size_t>(e)]);
    }

    Rng init_rng(Rng::derive(seed, 0xA11));
    TrainLog log;
    if (mode == "res-tfr") {
        meta.kind = "res_tfr";
        meta.net = cfg.make_net(1);
        ResTfrModel<T> model = make_res_tfr_model<T>(meta.net, init_rng);
        log = train_res_tfr(model, ds, tc);
        meta.best_epoch = log.best_epoch;
        meta.best_test_loss = log.best_test_loss;
        save_checkpoint<T>(model, meta, out / "checkpoint");
    } else {
        meta.kind = "igt";
        meta.net = cfg.make_net(static_cast<int>(tc.event_ids.size()));
        IgtModel<T> model = make_igt_model<T>(meta.net, init_rng);
        log = train_denoiser(model, ds, cfg.make_schedule(), tc);
        meta.best_epoch = log.best_epoch;
        meta.best_test_loss = log.best_test_loss;
        save_checkpoint<T>(model, meta, out / "checkpoint");
    }
    write_losses_csv(out / "losses.csv", log);
    std::printf("train(%s): best epoch %d, best test loss %.6f -> %s\n", mode.c_str(), log.best_epoch,
                log.best_test_loss, out.string().c_str());
    return 0;
}

int cmd_train(const CommonOpts& c, const std::string& data_dir, const std::string& mode) {
    const RunConfig cfg = load_or_default(c);
    const uint64_t seed = c.seed_set ? c.seed : cfg.training.seed;
    const fs::path out(c.out);
    const uint64_t h = config_hash(cfg) ^ fnv1a64("train:" + mode + ":" + data_dir);
    if (!c.force && run_is_up_to_date(out, "train", h, seed) && fs::exists(out / "checkpoint.json")) {
        std::printf("train: checkpoint up to date in %s\n", out.string().c_str());
        return 0;
    }
    const Dataset ds = load_dataset(data_dir);
    fs::create_directories(out);
    const int rc = cfg.precision == "f64" ? run_train<double>(cfg, ds, mode, seed, out)
                                          : run_train<float>(cfg, ds, mode, seed, out);
    write_run_manifest(out, "train", h, seed, {{"mode", mode}});
    return rc;
}

void check_stats_match(const CheckpointMeta& meta, const Dataset& ds) {
    for (size_t k = 0; k < meta.events.size(); ++k) {
        int e = -1;
        for (int i = 0; i < ds.n_events(); ++i)
            if (ds.cfg.events[static_cast<size_t>(i)].label == meta.events[k].label) e = i;
        if (e < 0)
            throw data_error("dataset lacks event '" + to_string(meta.events[k].label) +
                             "' required by the checkpoint");
        const TrajChannelStats& a = meta.stats[k];
        const TrajChannelStats& b = ds.stats[static_cast<size_t>(e)];
        if (a.mean_p != b.mean_p || a.std_p != b.std_p || a.mean_q != b.mean_q || a.std_q != b.std_q)
            throw data_error("checkpoint normalization statistics do not match the dataset; the model "
                             "was trained on different data (event '" +
                             to_string(meta.events[k].label) + "')");
    }
}

/// Conditions for the checkpoint's events: trajectories of a dataset record,
/// or simulated from a parameter vector.
std::vector<std::pair<int, Trajectory>> conditions_for(const CheckpointMeta& meta, const RunConfig& cfg,
                                                       const Dataset* ds, int record,
                                                       const ParamVector* truth) {
    std::vector<std::pair<int, Trajectory>> conds;
    for (size_t k = 0; k < meta.events.size(); ++k) {
        if (ds && record >= 0) {
            int e = -1;
            for (int i = 0; i < ds->n_events(); ++i)
                if (ds->cfg.events[static_cast<size_t>(i)].label == meta.events[k].label) e = i;
            if (e < 0) throw data_error("dataset lacks a conditioned event");
            conds.push_back({static_cast<int>(k), ds->traj(e, record)});
        } else {
            conds.push_back({static_cast<int>(k),
                             simulate(*truth, voltage_profile(meta.events[k], cfg.grid), cfg.grid)});
        }
    }
    return conds;
}

template <typename T>
PosteriorSamples run_sampler(const CheckpointMeta& meta, const fs::path& ckpt, const RunConfig& cfg,
                             const std::vector<std::pair<int, Trajectory>>& conds, int n, uint64_t seed) {
    const IgtModel<T> model = load_igt_checkpoint<T>(ckpt);
    const BatchDenoiser den = make_igt_denoiser(model, conds, meta.stats);
    const DiffusionSchedule sched = DiffusionSchedule::make(meta.sched_steps, meta.beta0, meta.betaT);
    SamplerOptions opts;
    opts.batch = cfg.sampler_batch;
    opts.matched_terminal_start = cfg.matched_terminal_start;
    PosteriorSamples ps = sample_posterior(ParamSpace::clm30(), den, sched, n, seed, opts);
    for (const auto& e : meta.events) ps.conditioning.push_back(to_string(e.label));
    return ps;
}

int cmd_infer(const CommonOpts& c, const std::string& ckpt, const std::string& data_dir, int record,
              bool truth_defaults, int n) {
    const RunConfig cfg = load_or_default(c);
    const uint64_t seed = c.seed_set ? c.seed : cfg.eval_seed;
    const int n_samples = n > 0 ? n : cfg.eval_n_samples;
    const fs::path out(c.out);
    const uint64_t h = config_hash(cfg) ^ fnv1a64("infer:" + ckpt + ":" + data_dir + ":" +
                                                  std::to_string(record) + ":" + std::to_string(n_samples));
    if (!c.force && run_is_up_to_date(out, "infer", h, seed)) {
        std::printf("infer: samples up to date in %s\n", out.string().c_str());
        return 0;
    }
    CheckpointMeta meta = load_checkpoint_meta(ckpt);
    if (meta.kind != "igt") throw usage_error("infer requires a diffusion checkpoint");
    if (!truth_defaults && record < 0) throw usage_error("pass --record or --truth-defaults");

    std::optional<Dataset> ds;
    if (!data_dir.empty()) {
        ds = load_dataset(data_dir);
        check_stats_match(meta, *ds);
    }
    if (record >= 0 && !ds) throw usage_error("--record needs --data");
    const ParamVector defaults = ParamSpace::clm30().defaults();
    const auto conds = conditions_for(meta, cfg, ds ? &*ds : nullptr, record, &defaults);

    const PosteriorSamples ps = meta.precision == "f64"
                                    ? run_sampler<double>(meta, ckpt, cfg, conds, n_samples, seed)
                                    : run_sampler<float>(meta, ckpt, cfg, conds, n_samples, seed);
    save_posterior(out, ps);
    write_run_manifest(out, "infer", h, seed,
                       {{"n", n_samples}, {"preclip_oob_fraction", ps.preclip_oob_fraction}});
    std::printf("infer: %d samples (oob fraction %.4f) -> %s\n", n_samples, ps.preclip_oob_fraction,
                out.string().c_str());
    return 0;
}

int cmd_eval(const CommonOpts& c, const std::string& ckpt, const std::string& baseline_ckpt,
             const std::string& data_dir, int record, bool truth_defaults, int n, bool ood) {
    const RunConfig cfg = load_or_default(c);
    const uint64_t seed = c.seed_set ? c.seed : cfg.eval_seed;
    const int n_samples = n > 0 ? n : cfg.eval_n_samples;
    const fs::path out(c.out);
    const uint64_t h = config_hash(cfg) ^
                       fnv1a64("eval:" + ckpt + ":" + baseline_ckpt + ":" + data_dir + ":" +
                               std::to_string(record) + ":" + std::to_string(n_samples) + (ood ? ":ood" : ""));
    if (!c.force && run_is_up_to_date(out, "eval", h, seed)) {
        std::printf("eval: report up to date in %s\n", out.string().c_str());
        return 0;
    }
    CheckpointMeta meta = load_checkpoint_meta(ckpt);
    if (meta.kind != "igt") throw usage_error("eval requires a diffusion checkpoint");
    if (!truth_defaults && record < 0) throw usage_error("pass --record or --truth-defaults");

    std::optional<Dataset> ds;
    if (!data_dir.empty()) {
        ds = load_dataset(data_dir);
        check_stats_match(meta, *ds);
    }
    if (record >= 0 && !ds) throw usage_error("--record needs --data");

    const ParamSpace& space = ParamSpace::clm30();
    const ParamVector truth = record >= 0 ? ds->param_vec(record) : space.defaults();
    const auto conds = conditions_for(meta, cfg, ds ? &*ds : nullptr, record, &truth);

    const PosteriorSamples ps = meta.precision == "f64"
                                    ? run_sampler<double>(meta, ckpt, cfg, conds, n_samples, seed)
                                    : run_sampler<float>(meta, ckpt, cfg, conds, n_samples, seed);

    EvalReport rep = evaluate_posterior(ps.samples, truth, meta.events, cfg.grid, true);
    rep.preclip_oob_fraction = ps.preclip_oob_fraction;
    nlohmann::json report = eval_report_to_json(rep, space);
    report["n_samples"] = n_samples;
    report["seed"] = seed;
    report["conditions"] = ps.conditioning;

    if (!baseline_ckpt.empty()) {
        CheckpointMeta bmeta = load_checkpoint_meta(baseline_ckpt);
        if (bmeta.kind != "res_tfr") throw usage_error("--baseline expects a supervised checkpoint");
        // deterministic single-point estimate from the ordinary trajectory
        const Trajectory& obs = conds[0].second;
        std::vector<const Trajectory*> one{&obs};
        ParamVector est;
        if (bmeta.precision == "f64") {
            const ResTfrModel<double> bm = load_res_tfr_checkpoint<double>(baseline_ckpt);
            const Tensor<double> pred = res_tfr_forward(bm, pack_trajectories<double>(one, bmeta.stats[0]));
            ParamVector norm;
            for (int i = 0; i < kNumParams; ++i) norm[i] = pred.data[static_cast<size_t>(i)];
            est = denormalize_params(norm, space);
        } else {
            const ResTfrModel<float> bm = load_res_tfr_checkpoint<float>(baseline_ckpt);
            const Tensor<float> pred = res_tfr_forward(bm, pack_trajectories<float>(one, bmeta.stats[0]));
            ParamVector norm;
            for (int i = 0; i < kNumParams; ++i) norm[i] = static_cast<double>(pred.data[static_cast<size_t>(i)]);
            est = denormalize_params(norm, space);
        }
        for (int i = 0; i < kNumParams; ++i)
            est[i] = std::min(space.upper(i), std::max(space.lower(i), est[i]));
        const auto r = rpe(est, truth, space);
        nlohmann::json bj;
        bj["marpe"] = marpe(r);
        for (const auto& ev : meta.events) {
            const std::vector<ParamVector> single{est};
            bj["rmse"][to_string(ev.label)] = mean_event_rmse(single, truth, ev, cfg.grid);
        }
        report["baseline"] = bj;
    }

    fs::create_directories(out);
    write_json_file(out / "eval_report.json", report);
    if (!rep.mi.empty()) write_mi_csv(out / "mi_matrix.csv", rep.mi, space);
    save_posterior(out, ps);

    if (ood) {
        Rng ood_rng(cfg.ood_seed);
        nlohmann::json groups;
        const struct {
            FaultLabel cls;
            int count;
            const char* name;
        } kinds[] = {{FaultLabel::ordinary, cfg.ood_ordinary, "ordinary"},
                     {FaultLabel::trip, cfg.ood_trip, "trip"},
                     {FaultLabel::stall, cfg.ood_stall, "stall"}};
        for (const auto& kind : kinds) {
            nlohmann::json list = nlohmann::json::array();
            for (int i = 0; i < kind.count; ++i) {
                const FaultSpec spec = randomized_fault(kind.cls, ood_rng);
                const double mr = mean_event_rmse(ps.samples, truth, spec, cfg.grid);
                list.push_back({{"spec", fault_to_json(spec)}, {"mean_rmse", mr}});
            }
            groups[kind.name] = list;
        }
        write_json_file(out / "ood_report.json", groups);
    }
    write_run_manifest(out, "eval", h, seed, {{"n", n_samples}});
    std::printf("eval: MARPE %.3f%%, wrote report to %s\n", rep.marpe_mean, out.string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    par::tune_allocator();
    CLI::App app{"composite-load-model parameter estimation with conditional diffusion"};
    app.require_subcommand(1);

    CommonOpts sim_c, gen_c, sobol_c, train_c, infer_c, eval_c;
    std::string sim_params, sim_fault = "ordinary";
    bool sim_csv = false;
    auto* sim = app.add_subcommand("simulate", "run the forward model for one fault event");
    add_common(sim, sim_c);
    sim->add_option("--params-file", sim_params, "JSON parameter vector (defaults when omitted)");
    sim->add_option("--fault", sim_fault, "fault label: ordinary | trip | stall");
    sim->add_flag("--csv", sim_csv, "also write CSV plot data");

    auto* gen = app.add_subcommand("gen-data", "generate the training/testing dataset");
    add_common(gen, gen_c);

    int sobol_n = 0;
    auto* sob = app.add_subcommand("sobol", "variance-based sensitivity analysis");
    add_common(sob, sobol_c);
    sob->add_option("--n", sobol_n, "base sample count override");

    std::string train_data, train_mode = "jcdi";
    auto* trn = app.add_subcommand("train", "train a model on a generated dataset");
    add_common(trn, train_c);
    trn->add_option("--data", train_data, "dataset directory")->required();
    trn->add_option("--mode", train_mode, "cdi | jcdi | res-tfr");

    std::string infer_ckpt, infer_data;
    int infer_record = -1, infer_n = 0;
    bool infer_defaults = false;
    auto* inf = app.add_subcommand("infer", "sample the posterior for one observation set");
    add_common(inf, infer_c);
    inf->add_option("--checkpoint", infer_ckpt, "checkpoint stem (without .json)")->required();
    inf->add_option("--data", infer_data, "dataset directory for --record conditions");
    inf->add_option("--record", infer_record, "dataset record index to condition on");
    inf->add_flag("--truth-defaults", infer_defaults, "condition on simulated default-parameter responses");
    inf->add_option("--n", infer_n, "number of posterior samples");

    std::string eval_ckpt, eval_base, eval_data;
    int eval_record = -1, eval_n = 0;
    bool eval_defaults = false, eval_ood = false;
    auto* evl = app.add_subcommand("eval", "posterior evaluation report (RPE, RMSE, MI)");
    add_common(evl, eval_c);
    evl->add_option("--checkpoint", eval_ckpt, "diffusion checkpoint stem")->required();
    evl->add_option("--baseline", eval_base, "supervised baseline checkpoint stem");
    evl->add_option("--data", eval_data, "dataset directory");
    evl->add_option("--record", eval_record, "test record index as the truth");
    evl->add_flag("--truth-defaults", eval_defaults, "use the default parameter vector as the truth");
    evl->add_flag("--ood", eval_ood, "evaluate randomized out-of-distribution fault events");
    evl->add_option("--n", eval_n, "number of posterior samples");

    try {
        app.parse(argc, argv);
        if (sim->parsed()) return cmd_simulate(sim_c, sim_params, sim_fault, sim_csv);
        if (gen->parsed()) return cmd_gen_data(gen_c);
        if (sob->parsed()) return cmd_sobol(sobol_c, sobol_n);
        if (trn->parsed()) return cmd_train(train_c, train_data, train_mode);
        if (inf->parsed()) return cmd_infer(infer_c, infer_ckpt, infer_data, infer_record, infer_defaults, infer_n);
        if (evl->parsed()) return cmd_eval(eval_c, eval_ckpt, eval_base, eval_data, eval_record,
                                           eval_defaults, eval_n, eval_ood);
        return 1;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const usage_error& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const contract_error& e) {
        std::fprintf(stderr, "contract error: %s\n", e.what());
        return 2;
    } catch (const data_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const numerical_error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    }
}

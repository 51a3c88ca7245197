#include "jcdi/dataio.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>

#include "jcdi/diffusion.hpp"
#include "jcdi/rng.hpp"

namespace jcdi {

void write_f32(const std::filesystem::path& path, std::span<const float> data) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("cannot open for write: " + path.string());
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!os) throw data_error("short write: " + path.string());
}

std::vector<float> read_f32(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary | std::ios::ate);
    if (!is) throw data_error("cannot open: " + path.string());
    const std::streamsize bytes = is.tellg();
    if (bytes % static_cast<std::streamsize>(sizeof(float)) != 0)
        throw data_error("file size is not a multiple of 4: " + path.string());
    std::vector<float> out(static_cast<size_t>(bytes) / sizeof(float));
    is.seekg(0);
    is.read(reinterpret_cast<char*>(out.data()), bytes);
    if (!is) throw data_error("short read: " + path.string());
    return out;
}

// ---------------------------------------------------------------------------

ParamVector Dataset::param_vec(int i) const {
    ParamVector p;
    for (int j = 0; j < kNumParams; ++j)
        p[j] = static_cast<double>(params[static_cast<size_t>(i) * kNumParams + static_cast<size_t>(j)]);
    return p;
}

Trajectory Dataset::traj(int event, int i) const {
    const int L = cfg.grid.n_out;
    Trajectory t;
    t.p.resize(static_cast<size_t>(L));
    t.q.resize(static_cast<size_t>(L));
    const float* base = trajs[static_cast<size_t>(event)].data() + static_cast<int64_t>(i) * 2 * L;
    for (int j = 0; j < L; ++j) {
        t.p[static_cast<size_t>(j)] = static_cast<double>(base[j]);
        t.q[static_cast<size_t>(j)] = static_cast<double>(base[L + j]);
    }
    return t;
}

std::vector<float> sample_params(const ParamSpace& space, int n, uint64_t seed) {
    std::vector<float> out(static_cast<size_t>(n) * static_cast<size_t>(space.size()));
    for (int r = 0; r < n; ++r) {
        Rng rng(Rng::derive(seed, static_cast<uint64_t>(r)));
        for (int i = 0; i < space.size(); ++i) {
            const double x = space.lower(i) + rng.uniform01() * space.range(i);
            out[static_cast<size_t>(r) * static_cast<size_t>(space.size()) + static_cast<size_t>(i)] =
                snap_to_f32_bounds(x, space.lower(i), space.upper(i));
        }
    }
    return out;
}

Dataset generate_dataset(const DatasetConfig& cfg) {
    if (cfg.n_train <= 0 || cfg.n_train >= cfg.n_records)
        throw config_error("dataset split must leave both train and test records");
    if (cfg.events.empty()) throw config_error("dataset needs at least one event");

    const ParamSpace& space = ParamSpace::clm30();
    const int n_ev = static_cast<int>(cfg.events.size());
    const int L = cfg.grid.n_out;

    std::vector<VoltageProfile> profiles;
    for (const auto& ev : cfg.events) profiles.push_back(voltage_profile(ev, cfg.grid));

    Dataset ds;
    ds.cfg = cfg;
    ds.params.resize(static_cast<size_t>(cfg.n_records) * kNumParams);
    ds.trajs.assign(static_cast<size_t>(n_ev),
                    std::vector<float>(static_cast<size_t>(cfg.n_records) * 2 * static_cast<size_t>(L)));

    std::atomic<int> dropped{0};
    std::atomic<bool> failed{false};

#pragma omp parallel for schedule(dynamic, 16)
    for (int r = 0; r < cfg.n_records; ++r) {
        if (failed.load()) continue;
        const uint64_t rec_stream = Rng::derive(cfg.seed, static_cast<uint64_t>(r));
        bool done = false;
        for (int attempt = 0; attempt < 100 && !done; ++attempt) {
            Rng rng(Rng::derive(rec_stream, static_cast<uint64_t>(attempt)));
            ParamVector pv;
            float pf[kNumParams];
            for (int i = 0; i < kNumParams; ++i) {
                const double x = space.lower(i) + rng.uniform01() * space.range(i);
                pf[i] = snap_to_f32_bounds(x, space.lower(i), space.upper(i));
                pv[i] = static_cast<double>(pf[i]);
            }
            try {
                std::vector<Trajectory> results;
                results.reserve(static_cast<size_t>(n_ev));
                for (int e = 0; e < n_ev; ++e)
                    results.push_back(simulate(pv, profiles[static_cast<size_t>(e)], cfg.grid, cfg.constants));
                for (int i = 0; i < kNumParams; ++i)
                    ds.params[static_cast<size_t>(r) * kNumParams + static_cast<size_t>(i)] = pf[i];
                for (int e = 0; e < n_ev; ++e) {
                    float* dst = ds.trajs[static_cast<size_t>(e)].data() + static_cast<int64_t>(r) * 2 * L;
                    for (int j = 0; j < L; ++j) {
                        dst[j] = static_cast<float>(results[static_cast<size_t>(e)].p[static_cast<size_t>(j)]);
                        dst[L + j] = static_cast<float>(results[static_cast<size_t>(e)].q[static_cast<size_t>(j)]);
                    }
                }
                done = true;
            } catch (const numerical_error&) {
                ++dropped;  // resample this record
            }
        }
        if (!done) failed.store(true);
    }
    if (failed.load()) throw data_error("record generation failed repeatedly; check parameter ranges");
    ds.dropped = dropped.load();

    // Normalization statistics over the training split only.
    ds.stats.resize(static_cast<size_t>(n_ev));
    ds.stats_floored.assign(static_cast<size_t>(n_ev), false);
    for (int e = 0; e < n_ev; ++e) {
        double sum_p = 0, sum_q = 0, sq_p = 0, sq_q = 0;
        const int64_t count = static_cast<int64_t>(cfg.n_train) * L;
        const std::vector<float>& blk = ds.trajs[static_cast<size_t>(e)];
        for (int r = 0; r < cfg.n_train; ++r) {
            const float* base = blk.data() + static_cast<int64_t>(r) * 2 * L;
            for (int j = 0; j < L; ++j) {
                sum_p += base[j];
                sq_p += static_cast<double>(base[j]) * base[j];
                sum_q += base[L + j];
                sq_q += static_cast<double>(base[L + j]) * base[L + j];
            }
        }
        TrajChannelStats st;
        st.mean_p = sum_p / static_cast<double>(count);
        st.mean_q = sum_q / static_cast<double>(count);
        const double var_p = std::max(0.0, sq_p / static_cast<double>(count) - st.mean_p * st.mean_p);
        const double var_q = std::max(0.0, sq_q / static_cast<double>(count) - st.mean_q * st.mean_q);
        st.std_p = std::sqrt(var_p);
        st.std_q = std::sqrt(var_q);
        if (st.std_p < 1e-8) {
            st.std_p = 1e-8;
            ds.stats_floored[static_cast<size_t>(e)] = true;
        }
        if (st.std_q < 1e-8) {
            st.std_q = 1e-8;
            ds.stats_floored[static_cast<size_t>(e)] = true;
        }
        ds.stats[static_cast<size_t>(e)] = st;
    }
    return ds;
}

// ---------------------------------------------------------------------------

nlohmann::json fault_to_json(const FaultSpec& s) {
    return {{"label", to_string(s.label)},
            {"v_min", s.v_min},
            {"onset_s", s.onset_s},
            {"clearing_ms", s.clearing_ms},
            {"recovery_tau_s", s.recovery_tau_s}};
}

FaultSpec fault_from_json(const nlohmann::json& j) {
    FaultSpec s;
    s.label = fault_label_from_string(j.at("label").get<std::string>());
    s.v_min = j.at("v_min").get<double>();
    s.onset_s = j.at("onset_s").get<double>();
    s.clearing_ms = j.at("clearing_ms").get<double>();
    s.recovery_tau_s = j.at("recovery_tau_s").get<double>();
    return s;
}

nlohmann::json grid_to_json(const TimeGrid& g) {
    return {{"n_out", g.n_out}, {"dt_out", g.dt_out}, {"oversample", g.oversample}};
}

TimeGrid grid_from_json(const nlohmann::json& j) {
    TimeGrid g;
    g.n_out = j.at("n_out").get<int>();
    g.dt_out = j.at("dt_out").get<double>();
    g.oversample = j.at("oversample").get<int>();
    return g;
}

nlohmann::json net_config_to_json(const NetConfig& c) {
    return {{"d_model", c.d_model}, {"d_ffn", c.d_ffn},     {"n_layers", c.n_layers},
            {"n_heads", c.n_heads}, {"n_params", c.n_params}, {"n_events", c.n_events},
            {"time_dim", c.time_dim}, {"stem_ch", c.stem_ch}, {"mid_ch", c.mid_ch}};
}

NetConfig net_config_from_json(const nlohmann::json& j) {
    NetConfig c;
    c.d_model = j.at("d_model").get<int>();
    c.d_ffn = j.at("d_ffn").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_params = j.at("n_params").get<int>();
    c.n_events = j.at("n_events").get<int>();
    c.time_dim = j.at("time_dim").get<int>();
    c.stem_ch = j.at("stem_ch").get<int>();
    c.mid_ch = j.at("mid_ch").get<int>();
    return c;
}

nlohmann::json stats_to_json(const TrajChannelStats& s) {
    return {{"p", {{"mean", s.mean_p}, {"std", s.std_p}}}, {"q", {{"mean", s.mean_q}, {"std", s.std_q}}}};
}

TrajChannelStats stats_from_json(const nlohmann::json& j) {
    TrajChannelStats s;
    s.mean_p = j.at("p").at("mean").get<double>();
    s.std_p = j.at("p").at("std").get<double>();
    s.mean_q = j.at("q").at("mean").get<double>();
    s.std_q = j.at("q").at("std").get<double>();
    return s;
}

nlohmann::json sim_constants_to_json(const SimConstants& c) {
    return {{"inertia_h", c.inertia_h}, {"rotor_r", c.rotor_r},   {"xprime", c.xprime},
            {"torque_nom", c.torque_nom}, {"tp0_a", c.tp0_a},     {"v_stall", c.v_stall},
            {"t_stall", c.t_stall},     {"v_rst", c.v_rst},       {"t_rst", c.t_rst},
            {"v_d1", c.v_d1},           {"v_d2", c.v_d2}};
}

SimConstants sim_constants_from_json(const nlohmann::json& j) {
    SimConstants c;
    c.inertia_h = j.at("inertia_h").get<double>();
    c.rotor_r = j.at("rotor_r").get<double>();
    c.xprime = j.at("xprime").get<double>();
    c.torque_nom = j.at("torque_nom").get<double>();
    c.tp0_a = j.at("tp0_a").get<double>();
    c.v_stall = j.at("v_stall").get<double>();
    c.t_stall = j.at("t_stall").get<double>();
    c.v_rst = j.at("v_rst").get<double>();
    c.t_rst = j.at("t_rst").get<double>();
    c.v_d1 = j.at("v_d1").get<double>();
    c.v_d2 = j.at("v_d2").get<double>();
    return c;
}

nlohmann::json param_space_to_json(const ParamSpace& s) {
    nlohmann::json names = nlohmann::json::array(), lo = nlohmann::json::array(),
                   hi = nlohmann::json::array(), def = nlohmann::json::array();
    const ParamVector d = s.defaults();
    for (int i = 0; i < s.size(); ++i) {
        names.push_back(s.name(i));
        lo.push_back(s.lower(i));
        hi.push_back(s.upper(i));
        def.push_back(d[i]);
    }
    return {{"names", names}, {"lower", lo}, {"upper", hi}, {"defaults", def}};
}

static void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream os(path);
    if (!os) throw data_error("cannot open for write: " + path.string());
    os << j.dump(2) << "\n";
}

static nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw data_error("cannot open: " + path.string());
    nlohmann::json j;
    is >> j;
    return j;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir, bool force) {
    namespace fs = std::filesystem;
    const fs::path manifest = dir / "manifest.json";
    if (fs::exists(manifest) && !force)
        throw data_error("dataset already exists at " + dir.string() + " (use force to overwrite)");
    fs::create_directories(dir);

    write_f32(dir / "params.f32", ds.params);
    nlohmann::json files = {{"params", "params.f32"}};
    nlohmann::json events = nlohmann::json::array();
    nlohmann::json norm;
    for (int e = 0; e < ds.n_events(); ++e) {
        const std::string label = to_string(ds.cfg.events[static_cast<size_t>(e)].label);
        const std::string fname = "traj_" + label + ".f32";
        write_f32(dir / fname, ds.trajs[static_cast<size_t>(e)]);
        files["traj_" + label] = fname;
        events.push_back(fault_to_json(ds.cfg.events[static_cast<size_t>(e)]));
        nlohmann::json st = stats_to_json(ds.stats[static_cast<size_t>(e)]);
        st["floored"] = static_cast<bool>(ds.stats_floored[static_cast<size_t>(e)]);
        norm[label] = st;
    }

    const nlohmann::json j = {{"format_version", kFormatVersion},
                              {"n_records", ds.cfg.n_records},
                              {"n_train", ds.cfg.n_train},
                              {"n_test", ds.n_test()},
                              {"seed", ds.cfg.seed},
                              {"dropped", ds.dropped},
                              {"grid", grid_to_json(ds.cfg.grid)},
                              {"events", events},
                              {"normalization", norm},
                              {"sim_constants", sim_constants_to_json(ds.cfg.constants)},
                              {"param_space", param_space_to_json(ParamSpace::clm30())},
                              {"files", files}};
    write_json(manifest, j);
}

Dataset load_dataset(const std::filesystem::path& dir) {
    const nlohmann::json j = read_json(dir / "manifest.json");
    if (!j.contains("format_version")) throw data_error("dataset manifest missing format_version");
    if (j.at("format_version").get<int>() != kFormatVersion)
        throw data_error("unsupported dataset format version");

    Dataset ds;
    ds.cfg.n_records = j.at("n_records").get<int>();
    ds.cfg.n_train = j.at("n_train").get<int>();
    ds.cfg.seed = j.at("seed").get<uint64_t>();
    ds.cfg.grid = grid_from_json(j.at("grid"));
    ds.cfg.constants = sim_constants_from_json(j.at("sim_constants"));
    ds.dropped = j.at("dropped").get<int>();
    ds.cfg.events.clear();
    for (const auto& e : j.at("events")) ds.cfg.events.push_back(fault_from_json(e));

    ds.params = read_f32(dir / j.at("files").at("params").get<std::string>());
    if (static_cast<int64_t>(ds.params.size()) != static_cast<int64_t>(ds.cfg.n_records) * kNumParams)
        throw data_error("params block has unexpected size");

    const int L = ds.cfg.grid.n_out;
    for (const auto& ev : ds.cfg.events) {
        const std::string label = to_string(ev.label);
        std::vector<float> blk = read_f32(dir / j.at("files").at("traj_" + label).get<std::string>());
        if (static_cast<int64_t>(blk.size()) != static_cast<int64_t>(ds.cfg.n_records) * 2 * L)
            throw data_error("trajectory block " + label + " has unexpected size");
        ds.trajs.push_back(std::move(blk));
        const nlohmann::json& st = j.at("normalization").at(label);
        ds.stats.push_back(stats_from_json(st));
        ds.stats_floored.push_back(st.at("floored").get<bool>());
    }
    return ds;
}

// ---------------------------------------------------------------------------

void save_trajectory(const std::filesystem::path& stem, const Trajectory& tr, const TimeGrid& grid) {
    std::vector<float> block(static_cast<size_t>(2 * tr.size()));
    for (int i = 0; i < tr.size(); ++i) {
        block[static_cast<size_t>(i)] = static_cast<float>(tr.p[static_cast<size_t>(i)]);
        block[static_cast<size_t>(tr.size() + i)] = static_cast<float>(tr.q[static_cast<size_t>(i)]);
    }
    write_f32(std::filesystem::path(stem).concat(".f32"), block);
    const nlohmann::json j = {{"dt_out", grid.dt_out},
                              {"n", tr.size()},
                              {"channels", {"p", "q"}},
                              {"format_version", kFormatVersion}};
    write_json(std::filesystem::path(stem).concat(".json"), j);
}

Trajectory load_trajectory(const std::filesystem::path& stem) {
    const nlohmann::json j = read_json(std::filesystem::path(stem).concat(".json"));
    const int n = j.at("n").get<int>();
    const std::vector<float> block = read_f32(std::filesystem::path(stem).concat(".f32"));
    if (static_cast<int>(block.size()) != 2 * n) throw data_error("trajectory block size mismatch");
    Trajectory tr;
    tr.p.assign(block.begin(), block.begin() + n);
    tr.q.assign(block.begin() + n, block.end());
    return tr;
}

void save_trajectory_csv(const std::filesystem::path& path, const Trajectory& tr, const TimeGrid& grid) {
    std::ofstream os(path);
    if (!os) throw data_error("cannot open for write: " + path.string());
    os << "t,p,q\n";
    char buf[96];
    for (int i = 0; i < tr.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.9g,%.9g\n", i * grid.dt_out, tr.p[static_cast<size_t>(i)],
                      tr.q[static_cast<size_t>(i)]);
        os << buf;
    }
}

void save_posterior(const std::filesystem::path& dir, const PosteriorSamples& ps) {
    std::filesystem::create_directories(dir);
    std::vector<float> block(ps.samples.size() * kNumParams);
    for (size_t s = 0; s < ps.samples.size(); ++s)
        for (int i = 0; i < kNumParams; ++i)
            block[s * kNumParams + static_cast<size_t>(i)] = static_cast<float>(ps.samples[s][i]);
    write_f32(dir / "samples.f32", block);
    const nlohmann::json j = {{"format_version", kFormatVersion},
                              {"n", ps.samples.size()},
                              {"seed", ps.seed},
                              {"conditions", ps.conditioning},
                              {"clipped_components", ps.clipped_components},
                              {"preclip_oob_fraction", ps.preclip_oob_fraction}};
    write_json(dir / "samples.json", j);
}

std::vector<ParamVector> load_posterior(const std::filesystem::path& dir) {
    const nlohmann::json j = read_json(dir / "samples.json");
    const int64_t n = j.at("n").get<int64_t>();
    const std::vector<float> block = read_f32(dir / "samples.f32");
    if (static_cast<int64_t>(block.size()) != n * kNumParams) throw data_error("posterior block size mismatch");
    std::vector<ParamVector> out(static_cast<size_t>(n));
    for (int64_t s = 0; s < n; ++s)
        for (int i = 0; i < kNumParams; ++i)
            out[static_cast<size_t>(s)][i] = static_cast<double>(block[static_cast<size_t>(s * kNumParams + i)]);
    return out;
}

// ---------------------------------------------------------------------------

nlohmann::json checkpoint_meta_to_json(const CheckpointMeta& m) {
    nlohmann::json events = nlohmann::json::array(), stats = nlohmann::json::array();
    for (const auto& e : m.events) events.push_back(fault_to_json(e));
    for (const auto& s : m.stats) stats.push_back(stats_to_json(s));
    return {{"format_version", kFormatVersion},
            {"kind", m.kind},
            {"mode", m.mode},
            {"precision", m.precision},
            {"net", net_config_to_json(m.net)},
            {"events", events},
            {"normalization", stats},
            {"diffusion", {{"steps", m.sched_steps}, {"beta0", m.beta0}, {"betaT", m.betaT}}},
            {"seed", m.seed},
            {"best_epoch", m.best_epoch},
            {"best_test_loss", m.best_test_loss},
            {"param_space", param_space_to_json(ParamSpace::clm30())}};
}

CheckpointMeta checkpoint_meta_from_json(const nlohmann::json& j) {
    CheckpointMeta m;
    m.kind = j.at("kind").get<std::string>();
    m.mode = j.at("mode").get<std::string>();
    m.precision = j.at("precision").get<std::string>();
    m.net = net_config_from_json(j.at("net"));
    for (const auto& e : j.at("events")) m.events.push_back(fault_from_json(e));
    for (const auto& s : j.at("normalization")) m.stats.push_back(stats_from_json(s));
    m.sched_steps = j.at("diffusion").at("steps").get<int>();
    m.beta0 = j.at("diffusion").at("beta0").get<double>();
    m.betaT = j.at("diffusion").at("betaT").get<double>();
    m.seed = j.at("seed").get<uint64_t>();
    m.best_epoch = j.at("best_epoch").get<int>();
    m.best_test_loss = j.at("best_test_loss").get<double>();
    return m;
}

namespace detail {

void write_checkpoint_files(const std::filesystem::path& stem, const CheckpointMeta& meta,
                            const std::vector<std::pair<std::string, std::vector<float>>>& tensors,
                            const std::vector<std::vector<int>>& shapes) {
    if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
    nlohmann::json index;
    std::vector<float> blob;
    for (size_t i = 0; i < tensors.size(); ++i) {
        index[tensors[i].first] = {{"offset", blob.size() * sizeof(float)},
                                   {"shape", shapes[i]},
                                   {"dtype", "f32"}};
        blob.insert(blob.end(), tensors[i].second.begin(), tensors[i].second.end());
    }
    nlohmann::json j = checkpoint_meta_to_json(meta);
    j["tensors"] = index;
    j["blob"] = stem.filename().string() + ".bin";
    write_json(std::filesystem::path(stem).concat(".json"), j);
    write_f32(std::filesystem::path(stem).concat(".bin"), blob);
}

nlohmann::json read_checkpoint_index(const std::filesystem::path& stem, std::vector<float>& blob) {
    const nlohmann::json j = read_json(std::filesystem::path(stem).concat(".json"));
    blob = read_f32(std::filesystem::path(stem).concat(".bin"));
    return j.at("tensors");
}

}  // namespace detail

CheckpointMeta load_checkpoint_meta(const std::filesystem::path& stem) {
    return checkpoint_meta_from_json(read_json(std::filesystem::path(stem).concat(".json")));
}

}  // namespace jcdi

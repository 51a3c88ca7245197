#include "jcdi/config.hpp"

#include <fstream>
#include <set>

namespace jcdi {

NetConfig RunConfig::make_net(int n_events) const {
    NetConfig c;
    if (net_profile == "full")
        c = NetConfig::full(n_events);
    else if (net_profile == "desk")
        c = NetConfig::desk(n_events);
    else if (net_profile == "tiny")
        c = NetConfig::tiny(n_events);
    else
        throw config_error("unknown network profile: " + net_profile);
    return c;
}

namespace {

void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw config_error("config section " + where + " must be an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.contains(key)) throw config_error("unknown config key " + where + "." + key);
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    require_keys(j, {"grid", "events", "dataset", "network", "diffusion", "training", "sampler",
                     "sobol", "eval"},
                 "(root)");
    if (j.contains("grid")) {
        require_keys(j.at("grid"), {"n_out", "dt_out", "oversample"}, "grid");
        const auto& g = j.at("grid");
        if (g.contains("n_out")) c.grid.n_out = g.at("n_out").get<int>();
        if (g.contains("dt_out")) c.grid.dt_out = g.at("dt_out").get<double>();
        if (g.contains("oversample")) c.grid.oversample = g.at("oversample").get<int>();
        if (c.grid.n_out < 2 || c.grid.oversample < 1 || c.grid.dt_out <= 0)
            throw config_error("invalid time grid");
    }
    if (j.contains("events")) {
        c.events.clear();
        for (const auto& e : j.at("events")) {
            require_keys(e, {"label", "v_min", "onset_s", "clearing_ms", "recovery_tau_s"}, "events[]");
            c.events.push_back(fault_from_json(e));
        }
        if (c.events.empty()) throw config_error("events list is empty");
    }
    if (j.contains("dataset")) {
        require_keys(j.at("dataset"), {"n_records", "n_train", "seed"}, "dataset");
        const auto& d = j.at("dataset");
        if (d.contains("n_records")) c.dataset_n_records = d.at("n_records").get<int>();
        if (d.contains("n_train")) c.dataset_n_train = d.at("n_train").get<int>();
        if (d.contains("seed")) c.dataset_seed = d.at("seed").get<uint64_t>();
    }
    if (j.contains("network")) {
        require_keys(j.at("network"), {"profile", "precision"}, "network");
        const auto& n = j.at("network");
        if (n.contains("profile")) c.net_profile = n.at("profile").get<std::string>();
        if (n.contains("precision")) c.precision = n.at("precision").get<std::string>();
        if (c.precision != "f32" && c.precision != "f64")
            throw config_error("precision must be f32 or f64");
    }
    if (j.contains("diffusion")) {
        require_keys(j.at("diffusion"), {"steps", "beta0", "betaT"}, "diffusion");
        const auto& d = j.at("diffusion");
        if (d.contains("steps")) c.sched_steps = d.at("steps").get<int>();
        if (d.contains("beta0")) c.beta0 = d.at("beta0").get<double>();
        if (d.contains("betaT")) c.betaT = d.at("betaT").get<double>();
    }
    if (j.contains("training")) {
        require_keys(j.at("training"),
                     {"batch_size", "lr", "max_epochs", "patience", "clip_norm", "seed", "verbose"},
                     "training");
        const auto& t = j.at("training");
        if (t.contains("batch_size")) c.training.batch_size = t.at("batch_size").get<int>();
        if (t.contains("lr")) c.training.lr = t.at("lr").get<double>();
        if (t.contains("max_epochs")) c.training.max_epochs = t.at("max_epochs").get<int>();
        if (t.contains("patience")) c.training.patience = t.at("patience").get<int>();
        if (t.contains("clip_norm")) c.training.clip_norm = t.at("clip_norm").get<double>();
        if (t.contains("seed")) c.training.seed = t.at("seed").get<uint64_t>();
        if (t.contains("verbose")) c.training.verbose = t.at("verbose").get<bool>();
    }
    if (j.contains("sampler")) {
        require_keys(j.at("sampler"), {"batch", "matched_terminal_start"}, "sampler");
        const auto& s = j.at("sampler");
        if (s.contains("batch")) c.sampler_batch = s.at("batch").get<int>();
        if (s.contains("matched_terminal_start"))
            c.matched_terminal_start = s.at("matched_terminal_start").get<bool>();
    }
    if (j.contains("sobol")) {
        require_keys(j.at("sobol"), {"n_base", "n_boot", "seed"}, "sobol");
        const auto& s = j.at("sobol");
        if (s.contains("n_base")) c.sobol_n_base = s.at("n_base").get<int>();
        if (s.contains("n_boot")) c.sobol_n_boot = s.at("n_boot").get<int>();
        if (s.contains("seed")) c.sobol_seed = s.at("seed").get<uint64_t>();
    }
    if (j.contains("eval")) {
        require_keys(j.at("eval"),
                     {"n_samples", "seed", "ood_ordinary", "ood_trip", "ood_stall", "ood_seed"}, "eval");
        const auto& e = j.at("eval");
        if (e.contains("n_samples")) c.eval_n_samples = e.at("n_samples").get<int>();
        if (e.contains("seed")) c.eval_seed = e.at("seed").get<uint64_t>();
        if (e.contains("ood_ordinary")) c.ood_ordinary = e.at("ood_ordinary").get<int>();
        if (e.contains("ood_trip")) c.ood_trip = e.at("ood_trip").get<int>();
        if (e.contains("ood_stall")) c.ood_stall = e.at("ood_stall").get<int>();
        if (e.contains("ood_seed")) c.ood_seed = e.at("ood_seed").get<uint64_t>();
    }
    for (const auto& ev : c.events) ev.validate(c.grid);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw usage_error("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config parse error: " + std::string(e.what()));
    }
    return config_from_json(j);
}

nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : c.events) events.push_back(fault_to_json(e));
    return {{"grid", grid_to_json(c.grid)},
            {"events", events},
            {"dataset",
             {{"n_records", c.dataset_n_records}, {"n_train", c.dataset_n_train}, {"seed", c.dataset_seed}}},
            {"network", {{"profile", c.net_profile}, {"precision", c.precision}}},
            {"diffusion", {{"steps", c.sched_steps}, {"beta0", c.beta0}, {"betaT", c.betaT}}},
            {"training",
             {{"batch_size", c.training.batch_size},
              {"lr", c.training.lr},
              {"max_epochs", c.training.max_epochs},
              {"patience", c.training.patience},
              {"clip_norm", c.training.clip_norm},
              {"seed", c.training.seed},
              {"verbose", c.training.verbose}}},
            {"sampler", {{"batch", c.sampler_batch}, {"matched_terminal_start", c.matched_terminal_start}}},
            {"sobol", {{"n_base", c.sobol_n_base}, {"n_boot", c.sobol_n_boot}, {"seed", c.sobol_seed}}},
            {"eval",
             {{"n_samples", c.eval_n_samples},
              {"seed", c.eval_seed},
              {"ood_ordinary", c.ood_ordinary},
              {"ood_trip", c.ood_trip},
              {"ood_stall", c.ood_stall},
              {"ood_seed", c.ood_seed}}}};
}

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t config_hash(const RunConfig& c) { return fnv1a64(config_to_json(c).dump()); }

void write_run_manifest(const std::filesystem::path& dir, const std::string& command, uint64_t cfg_hash,
                        uint64_t seed, const nlohmann::json& extra) {
    std::filesystem::create_directories(dir);
    nlohmann::json j = {{"format_version", kFormatVersion},
                        {"command", command},
                        {"config_hash", cfg_hash},
                        {"seed", seed}};
    if (!extra.empty()) j["extra"] = extra;
    std::ofstream os(dir / "run_manifest.json");
    if (!os) throw data_error("cannot write run manifest in " + dir.string());
    os << j.dump(2) << "\n";
}

bool run_is_up_to_date(const std::filesystem::path& dir, const std::string& command, uint64_t cfg_hash,
                       uint64_t seed) {
    const std::filesystem::path p = dir / "run_manifest.json";
    if (!std::filesystem::exists(p)) return false;
    try {
        std::ifstream is(p);
        nlohmann::json j;
        is >> j;
        return j.at("command").get<std::string>() == command &&
               j.at("config_hash").get<uint64_t>() == cfg_hash && j.at("seed").get<uint64_t>() == seed;
    } catch (...) {
        return false;
    }
}

}  // namespace jcdi

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "jcdi/dataio.hpp"
#include "jcdi/diffusion.hpp"
#include "jcdi/train.hpp"

namespace jcdi {

/// Whole-workflow configuration. Loaded from JSON with strict schema
/// checking (unknown keys are rejected); flags override individual fields.
struct RunConfig {
    TimeGrid grid;
    std::vector<FaultSpec> events = default_events();

    int dataset_n_records = 30000;
    int dataset_n_train = 25000;
    uint64_t dataset_seed = 1234;

    std::string net_profile = "desk";   // desk | full | tiny
    std::string precision = "f32";      // f32 | f64

    int sched_steps = 200;
    double beta0 = 1e-4;
    double betaT = 5e-3;

    TrainConfig training;

    int sampler_batch = 512;
    bool matched_terminal_start = false;

    int sobol_n_base = 1024;
    int sobol_n_boot = 100;
    uint64_t sobol_seed = 17;

    int eval_n_samples = 1000;
    uint64_t eval_seed = 42;
    int ood_ordinary = 20;
    int ood_trip = 0;
    int ood_stall = 5;
    uint64_t ood_seed = 5150;

    NetConfig make_net(int n_events) const;
    DiffusionSchedule make_schedule() const { return DiffusionSchedule::make(sched_steps, beta0, betaT); }
};

RunConfig load_config(const std::filesystem::path& path);
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);

uint64_t fnv1a64(const std::string& s);
uint64_t config_hash(const RunConfig& c);

/// Every command writes a small manifest next to its outputs so a rerun with
/// the same configuration and seed can be detected and skipped.
void write_run_manifest(const std::filesystem::path& dir, const std::string& command, uint64_t cfg_hash,
                        uint64_t seed, const nlohmann::json& extra = nlohmann::json::object());
bool run_is_up_to_date(const std::filesystem::path& dir, const std::string& command, uint64_t cfg_hash,
                       uint64_t seed);

}  // namespace jcdi

#pragma once

#include <bit>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "jcdi/clm.hpp"
#include "jcdi/fault.hpp"
#include "jcdi/nn.hpp"

namespace jcdi {

inline constexpr int kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "on-disk blobs are little-endian; big-endian hosts are unsupported");

void write_f32(const std::filesystem::path& path, std::span<const float> data);
std::vector<float> read_f32(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// dataset

struct DatasetConfig {
    int n_records = 30000;
    int n_train = 25000;  // prefix of the records; split precedes any statistic
    std::vector<FaultSpec> events = default_events();
    TimeGrid grid;
    uint64_t seed = 1234;
    SimConstants constants;
};

/// In-memory dataset: float32 parameter matrix and per-event trajectory
/// blocks, exactly what the on-disk format stores. Parameters are snapped to
/// float32 before simulation, so stored records replay bit-exactly.
struct Dataset {
    DatasetConfig cfg;
    std::vector<float> params;              // n x 30
    std::vector<std::vector<float>> trajs;  // per event: n x 2 x n_out
    std::vector<TrajChannelStats> stats;    // per event, over the training split
    std::vector<bool> stats_floored;        // std fell below the 1e-8 floor
    int dropped = 0;

    int n() const { return cfg.n_records; }
    int n_train() const { return cfg.n_train; }
    int n_test() const { return cfg.n_records - cfg.n_train; }
    int n_events() const { return static_cast<int>(cfg.events.size()); }

    ParamVector param_vec(int i) const;
    Trajectory traj(int event, int i) const;
};

/// Samples parameters uniformly, simulates every configured event, drops and
/// resamples infeasible records. Parallel across records with per-record
/// derived seeds; bit-reproducible for any worker count.
Dataset generate_dataset(const DatasetConfig& cfg);

/// Uniform parameter draws only (no simulation), n x 30 float32.
std::vector<float> sample_params(const ParamSpace& space, int n, uint64_t seed);

void save_dataset(const Dataset& ds, const std::filesystem::path& dir, bool force = false);
Dataset load_dataset(const std::filesystem::path& dir);

/// Standardized [count, 2, L] network input for records of one event.
template <typename T>
Tensor<T> pack_dataset_batch(const Dataset& ds, int event, std::span<const int> records) {
    const int L = ds.cfg.grid.n_out;
    const int B = static_cast<int>(records.size());
    const TrajChannelStats& st = ds.stats[static_cast<size_t>(event)];
    const std::vector<float>& blk = ds.trajs[static_cast<size_t>(event)];
    Tensor<T> x = Tensor<T>::zeros({B, 2, L});
    for (int b = 0; b < B; ++b) {
        const int64_t src = static_cast<int64_t>(records[static_cast<size_t>(b)]) * 2 * L;
        for (int i = 0; i < L; ++i) {
            x.data[(static_cast<size_t>(b) * 2 + 0) * static_cast<size_t>(L) + static_cast<size_t>(i)] =
                static_cast<T>((blk[static_cast<size_t>(src + i)] - st.mean_p) / st.std_p);
            x.data[(static_cast<size_t>(b) * 2 + 1) * static_cast<size_t>(L) + static_cast<size_t>(i)] =
                static_cast<T>((blk[static_cast<size_t>(src + L + i)] - st.mean_q) / st.std_q);
        }
    }
    return x;
}

// ---------------------------------------------------------------------------
// json converters (manifest / checkpoint pieces)

nlohmann::json fault_to_json(const FaultSpec& s);
FaultSpec fault_from_json(const nlohmann::json& j);
nlohmann::json grid_to_json(const TimeGrid& g);
TimeGrid grid_from_json(const nlohmann::json& j);
nlohmann::json net_config_to_json(const NetConfig& c);
NetConfig net_config_from_json(const nlohmann::json& j);
nlohmann::json stats_to_json(const TrajChannelStats& s);
TrajChannelStats stats_from_json(const nlohmann::json& j);
nlohmann::json sim_constants_to_json(const SimConstants& c);
SimConstants sim_constants_from_json(const nlohmann::json& j);
nlohmann::json param_space_to_json(const ParamSpace& s);

// ---------------------------------------------------------------------------
// trajectory / posterior export

/// Binary trajectory block (row-major [2, n] float32) plus a sidecar JSON
/// header {dt_out, n, channels}.
void save_trajectory(const std::filesystem::path& stem, const Trajectory& tr, const TimeGrid& grid);
Trajectory load_trajectory(const std::filesystem::path& stem);
void save_trajectory_csv(const std::filesystem::path& path, const Trajectory& tr, const TimeGrid& grid);

struct PosteriorSamples;  // diffusion.hpp
void save_posterior(const std::filesystem::path& dir, const PosteriorSamples& ps);
std::vector<ParamVector> load_posterior(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// checkpoints: <stem>.json index + <stem>.bin flat little-endian float32 blob

struct CheckpointMeta {
    std::string kind;  // "igt" | "res_tfr"
    std::string mode;  // "cdi" | "jcdi" | "res_tfr"
    std::string precision = "f32";
    NetConfig net;
    std::vector<FaultSpec> events;        // conditioned events; index == event id
    std::vector<TrajChannelStats> stats;  // per conditioned event
    int sched_steps = 200;
    double beta0 = 1e-4, betaT = 5e-3;
    uint64_t seed = 0;
    int best_epoch = -1;
    double best_test_loss = 0.0;
};

nlohmann::json checkpoint_meta_to_json(const CheckpointMeta& m);
CheckpointMeta checkpoint_meta_from_json(const nlohmann::json& j);

namespace detail {
void write_checkpoint_files(const std::filesystem::path& stem, const CheckpointMeta& meta,
                            const std::vector<std::pair<std::string, std::vector<float>>>& tensors,
                            const std::vector<std::vector<int>>& shapes);
nlohmann::json read_checkpoint_index(const std::filesystem::path& stem, std::vector<float>& blob);
}  // namespace detail

template <typename T, typename Model>
void save_checkpoint(Model& model, const CheckpointMeta& meta, const std::filesystem::path& stem) {
    std::vector<std::pair<std::string, std::vector<float>>> tensors;
    std::vector<std::vector<int>> shapes;
    for (auto& [name, t] : model.named_params()) {
        std::vector<float> f(t->data.size());
        for (size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(t->data[i]);
        tensors.push_back({name, std::move(f)});
        shapes.push_back(t->shape);
    }
    detail::write_checkpoint_files(stem, meta, tensors, shapes);
}

template <typename T, typename Model>
void load_checkpoint_weights(Model& model, const std::filesystem::path& stem) {
    std::vector<float> blob;
    const nlohmann::json index = detail::read_checkpoint_index(stem, blob);
    for (auto& [name, t] : model.named_params()) {
        if (!index.contains(name)) throw data_error("checkpoint missing tensor " + name);
        const nlohmann::json& e = index.at(name);
        const std::vector<int> shape = e.at("shape").template get<std::vector<int>>();
        if (shape != t->shape)
            throw data_error("checkpoint tensor " + name + " has shape " + shape_str(shape) +
                             ", expected " + shape_str(t->shape));
        const int64_t off = e.at("offset").template get<int64_t>() / static_cast<int64_t>(sizeof(float));
        for (int64_t i = 0; i < t->numel(); ++i)
            t->data[static_cast<size_t>(i)] = static_cast<T>(blob[static_cast<size_t>(off + i)]);
    }
}

CheckpointMeta load_checkpoint_meta(const std::filesystem::path& stem);

template <typename T>
IgtModel<T> load_igt_checkpoint(const std::filesystem::path& stem, CheckpointMeta* meta_out = nullptr) {
    const CheckpointMeta meta = load_checkpoint_meta(stem);
    if (meta.kind != "igt") throw data_error("checkpoint is not a denoiser model");
    Rng rng(0);
    IgtModel<T> m = make_igt_model<T>(meta.net, rng);
    load_checkpoint_weights<T>(m, stem);
    if (meta_out) *meta_out = meta;
    return m;
}

template <typename T>
ResTfrModel<T> load_res_tfr_checkpoint(const std::filesystem::path& stem, CheckpointMeta* meta_out = nullptr) {
    const CheckpointMeta meta = load_checkpoint_meta(stem);
    if (meta.kind != "res_tfr") throw data_error("checkpoint is not a baseline model");
    Rng rng(0);
    ResTfrModel<T> m = make_res_tfr_model<T>(meta.net, rng);
    load_checkpoint_weights<T>(m, stem);
    if (meta_out) *meta_out = meta;
    return m;
}

}  // namespace jcdi

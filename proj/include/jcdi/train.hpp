#pragma once

#include <cstdio>
#include <limits>

#include "jcdi/dataio.hpp"
#include "jcdi/diffusion.hpp"

namespace jcdi {

struct TrainConfig {
    int batch_size = 128;
    double lr = 1e-4;
    int max_epochs = 40;
    int patience = 10;    // epochs without test-loss improvement before stopping
    double clip_norm = 1.0;
    uint64_t seed = 7;
    std::vector<int> event_ids;  // dataset event indices; model event k conditions on event_ids[k]
    bool verbose = false;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    int best_epoch = -1;
    double best_test_loss = std::numeric_limits<double>::infinity();
};

namespace train_detail {

template <typename T>
struct GradView {
    std::vector<Tensor<T>*> params;
    std::vector<Tensor<T>> zero_stash;   // for weights unused by a batch
    std::vector<Tensor<T>*> grads;

    template <typename Model>
    void collect(Tape<T>& tp, const ParamMap<T>& L, Model& model) {
        params.clear();
        grads.clear();
        zero_stash.clear();
        for (auto& [name, t] : model.named_params()) {
            params.push_back(t);
            Tensor<T>& g = tp.ensure_grad(L(*t));
            grads.push_back(&g);
        }
    }
};

inline std::vector<int> epoch_order(int n, uint64_t seed, int epoch) {
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    Rng rng(Rng::derive(seed, 1000 + static_cast<uint64_t>(epoch)));
    rng.shuffle(idx);
    return idx;
}

}  // namespace train_detail

/// Builds the denoiser training graph for one batch and returns the loss
/// node: tokens from noised latents, the drawn step, and the conditioned
/// trajectories; MSE against the drawn noise over all components.
template <typename T>
int denoiser_loss_graph(Tape<T>& tp, const ParamMap<T>& L, IgtModel<T>& model, const Dataset& ds,
                        std::span<const int> records, std::span<const int> ts,
                        const std::vector<double>& eps, const DiffusionSchedule& sched,
                        const std::vector<int>& event_ids) {
    const int B = static_cast<int>(records.size());
    Tensor<T> x_t = Tensor<T>::zeros({B, kNumParams});
    Tensor<T> eps_t = Tensor<T>::zeros({B, kNumParams});
    const ParamSpace& space = ParamSpace::clm30();
    for (int b = 0; b < B; ++b) {
        const ParamVector x0 = normalize_params(ds.param_vec(records[static_cast<size_t>(b)]), space);
        Latent x0l, el;
        for (int i = 0; i < kNumParams; ++i) {
            x0l[static_cast<size_t>(i)] = x0[i];
            el[static_cast<size_t>(i)] = eps[static_cast<size_t>(b) * kNumParams + static_cast<size_t>(i)];
        }
        const Latent xt = q_sample(x0l, ts[static_cast<size_t>(b)], el, sched);
        for (int i = 0; i < kNumParams; ++i) {
            x_t.data[static_cast<size_t>(b) * kNumParams + static_cast<size_t>(i)] = static_cast<T>(xt[static_cast<size_t>(i)]);
            eps_t.data[static_cast<size_t>(b) * kNumParams + static_cast<size_t>(i)] = static_cast<T>(el[static_cast<size_t>(i)]);
        }
    }
    const int xn = tp.constant(std::move(x_t));
    const int tn = tp.constant(sinusoidal_embed_batch<T>({ts.begin(), ts.end()}, model.cfg.time_dim));
    std::vector<IgtCond> conds;
    for (int k = 0; k < static_cast<int>(event_ids.size()); ++k)
        conds.push_back({k, tp.constant(pack_dataset_batch<T>(ds, event_ids[static_cast<size_t>(k)], records)), false});
    const int pred = igt_graph(tp, L, model, xn, tn, conds);
    return tp.mse(pred, tp.constant(std::move(eps_t)));
}

/// Trains the denoiser with Adam, early stopping on the test loss; the model
/// is left at the best-test-loss weights. Test noise draws are identical
/// across epochs so the curve is comparable.
template <typename T>
TrainLog train_denoiser(IgtModel<T>& model, const Dataset& ds, const DiffusionSchedule& sched,
                        const TrainConfig& tc) {
    if (static_cast<int>(tc.event_ids.size()) != model.cfg.n_events)
        throw contract_error("train: event list does not match the model's n_events");
    for (int e : tc.event_ids)
        if (e < 0 || e >= ds.n_events()) throw contract_error("train: event id outside the dataset");

    AdamState<T> adam;
    adam.lr = tc.lr;
    std::vector<Tensor<T>*> params;
    for (auto& [name, t] : model.named_params()) params.push_back(t);
    adam.init(params);

    auto eval_test_loss = [&]() -> double {
        Rng eval_rng(Rng::derive(tc.seed, 3000));
        double acc = 0.0;
        int64_t count = 0;
        std::vector<int> recs;
        std::vector<int> ts;
        std::vector<double> eps;
        for (int base = ds.n_train(); base < ds.n(); base += tc.batch_size) {
            const int nb = std::min(tc.batch_size, ds.n() - base);
            recs.resize(static_cast<size_t>(nb));
            ts.resize(static_cast<size_t>(nb));
            eps.assign(static_cast<size_t>(nb) * kNumParams, 0.0);
            for (int b = 0; b < nb; ++b) {
                recs[static_cast<size_t>(b)] = base + b;
                ts[static_cast<size_t>(b)] = static_cast<int>(eval_rng.uniform_int(1, sched.steps));
                for (int i = 0; i < kNumParams; ++i)
                    eps[static_cast<size_t>(b) * kNumParams + static_cast<size_t>(i)] = eval_rng.normal();
            }
            Tape<T> tp;
            const ParamMap<T> L = ParamMap<T>::template lift<IgtModel<T>>(tp, model, false);
            const int loss = denoiser_loss_graph(tp, L, model, ds, recs, ts, eps, sched, tc.event_ids);
            acc += static_cast<double>(tp.val(loss).data[0]) * nb;
            count += nb;
        }
        return acc / static_cast<double>(count);
    };

    TrainLog log;
    std::vector<Tensor<T>> best;
    const int steps_per_epoch = ds.n_train() / tc.batch_size;
    if (steps_per_epoch < 1) throw contract_error("train: batch size exceeds the training split");

    for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
        const std::vector<int> order = train_detail::epoch_order(ds.n_train(), tc.seed, epoch);
        Rng noise_rng(Rng::derive(tc.seed, 2000 + static_cast<uint64_t>(epoch)));
        double train_acc = 0.0;
        std::vector<int> ts(static_cast<size_t>(tc.batch_size));
        std::vector<double> eps;
        for (int s = 0; s < steps_per_epoch; ++s) {
            const std::span<const int> recs(order.data() + static_cast<size_t>(s) * tc.batch_size,
                                            static_cast<size_t>(tc.batch_size));
            eps.assign(static_cast<size_t>(tc.batch_size) * kNumParams, 0.0);
            for (int b = 0; b < tc.batch_size; ++b) {
                ts[static_cast<size_t>(b)] = static_cast<int>(noise_rng.uniform_int(1, sched.steps));
                for (int i = 0; i < kNumParams; ++i)
                    eps[static_cast<size_t>(b) * kNumParams + static_cast<size_t>(i)] = noise_rng.normal();
            }
            Tape<T> tp;
            const ParamMap<T> L = ParamMap<T>::template lift<IgtModel<T>>(tp, model, true);
            const int loss = denoiser_loss_graph(tp, L, model, ds, recs, ts, eps, sched, tc.event_ids);
            const double lv = static_cast<double>(tp.val(loss).data[0]);
            if (!std::isfinite(lv))
                throw numerical_error("training loss non-finite at epoch " + std::to_string(epoch) +
                                      " step " + std::to_string(s));
            tp.backward(loss);
            train_detail::GradView<T> gv;
            gv.collect(tp, L, model);
            clip_global_norm<T>(gv.grads, tc.clip_norm);
            std::vector<const Tensor<T>*> cgrads(gv.grads.begin(), gv.grads.end());
            adam.update(params, cgrads);
            train_acc += lv;
        }
        EpochLog el;
        el.epoch = epoch;
        el.train_loss = train_acc / steps_per_epoch;
        el.test_loss = eval_test_loss();
        log.epochs.push_back(el);
        if (tc.verbose)
            std::printf("[train] epoch %3d  train %.5f  test %.5f\n", epoch, el.train_loss, el.test_loss);
        if (el.test_loss < log.best_test_loss) {
            log.best_test_loss = el.test_loss;
            log.best_epoch = epoch;
            best.clear();
            for (auto* p : params) best.push_back(*p);
        }
        if (epoch - log.best_epoch >= tc.patience) break;
    }
    for (size_t i = 0; i < params.size(); ++i) *params[i] = best[i];
    return log;
}

/// Supervised baseline: MSE regression from the single conditioned event's
/// trajectory onto normalized parameters.
template <typename T>
TrainLog train_res_tfr(ResTfrModel<T>& model, const Dataset& ds, const TrainConfig& tc) {
    if (tc.event_ids.size() != 1) throw contract_error("baseline trains on exactly one event");
    const int event = tc.event_ids[0];
    if (event < 0 || event >= ds.n_events()) throw contract_error("train: event id outside the dataset");

    const ParamSpace& space = ParamSpace::clm30();
    auto make_target = [&](std::span<const int> recs) {
        Tensor<T> y = Tensor<T>::zeros({static_cast<int>(recs.size()), kNumParams});
        for (size_t b = 0; b < recs.size(); ++b) {
            const ParamVector x0 = normalize_params(ds.param_vec(recs[b]), space);
            for (int i = 0; i < kNumParams; ++i) y.data[b * kNumParams + static_cast<size_t>(i)] = static_cast<T>(x0[i]);
        }
        return y;
    };

    AdamState<T> adam;
    adam.lr = tc.lr;
    std::vector<Tensor<T>*> params;
    for (auto& [name, t] : model.named_params()) params.push_back(t);
    adam.init(params);

    auto eval_test_loss = [&]() -> double {
        double acc = 0.0;
        int64_t count = 0;
        std::vector<int> recs;
        for (int base = ds.n_train(); base < ds.n(); base += tc.batch_size) {
            const int nb = std::min(tc.batch_size, ds.n() - base);
            recs.resize(static_cast<size_t>(nb));
            for (int b = 0; b < nb; ++b) recs[static_cast<size_t>(b)] = base + b;
            Tape<T> tp;
            const ParamMap<T> L = ParamMap<T>::template lift<ResTfrModel<T>>(tp, model, false);
            const int pred = res_tfr_graph(tp, L, model, tp.constant(pack_dataset_batch<T>(ds, event, recs)));
            const int loss = tp.mse(pred, tp.constant(make_target(recs)));
            acc += static_cast<double>(tp.val(loss).data[0]) * nb;
            count += nb;
        }
        return acc / static_cast<double>(count);
    };

    TrainLog log;
    std::vector<Tensor<T>> best;
    const int steps_per_epoch = ds.n_train() / tc.batch_size;
    if (steps_per_epoch < 1) throw contract_error("train: batch size exceeds the training split");

    for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
        const std::vector<int> order = train_detail::epoch_order(ds.n_train(), tc.seed, epoch);
        double train_acc = 0.0;
        for (int s = 0; s < steps_per_epoch; ++s) {
            const std::span<const int> recs(order.data() + static_cast<size_t>(s) * tc.batch_size,
                                            static_cast<size_t>(tc.batch_size));
            Tape<T> tp;
            const ParamMap<T> L = ParamMap<T>::template lift<ResTfrModel<T>>(tp, model, true);
            const int pred = res_tfr_graph(tp, L, model, tp.constant(pack_dataset_batch<T>(ds, event, recs)));
            const int loss = tp.mse(pred, tp.constant(make_target(recs)));
            const double lv = static_cast<double>(tp.val(loss).data[0]);
            if (!std::isfinite(lv))
                throw numerical_error("baseline loss non-finite at epoch " + std::to_string(epoch));
            tp.backward(loss);
            train_detail::GradView<T> gv;
            gv.collect(tp, L, model);
            clip_global_norm<T>(gv.grads, tc.clip_norm);
            std::vector<const Tensor<T>*> cgrads(gv.grads.begin(), gv.grads.end());
            adam.update(params, cgrads);
            train_acc += lv;
        }
        EpochLog el;
        el.epoch = epoch;
        el.train_loss = train_acc / steps_per_epoch;
        el.test_loss = eval_test_loss();
        log.epochs.push_back(el);
        if (tc.verbose)
            std::printf("[baseline] epoch %3d  train %.5f  test %.5f\n", epoch, el.train_loss, el.test_loss);
        if (el.test_loss < log.best_test_loss) {
            log.best_test_loss = el.test_loss;
            log.best_epoch = epoch;
            best.clear();
            for (auto* p : params) best.push_back(*p);
        }
        if (epoch - log.best_epoch >= tc.patience) break;
    }
    for (size_t i = 0; i < params.size(); ++i) *params[i] = best[i];
    return log;
}

/// Denoiser bound to fixed conditions as a batched noise predictor for the
/// reverse sampler. Condition tokens are encoded once and replicated per
/// chain.
template <typename T>
BatchDenoiser make_igt_denoiser(const IgtModel<T>& model,
                                const std::vector<std::pair<int, Trajectory>>& conditions,
                                const std::vector<TrajChannelStats>& stats) {
    if (conditions.empty()) throw contract_error("denoiser needs at least one condition");
    // Encode each condition once for a single sample.
    std::vector<std::pair<int, Tensor<T>>> tokens;
    for (const auto& [eid, traj] : conditions) {
        if (eid < 0 || eid >= model.cfg.n_events)
            throw contract_error("condition references unknown event id " + std::to_string(eid));
        std::vector<const Trajectory*> one{&traj};
        const Tensor<T> x = pack_trajectories<T>(one, stats[static_cast<size_t>(eid)]);
        tokens.push_back({eid, igt_condition_tokens(model, eid, x)});
    }
    return [&model, tokens](const std::vector<double>& x, int n, int t, std::vector<double>& eps_out) {
        Tensor<T> x_t = Tensor<T>::zeros({n, kNumParams});
        for (int64_t i = 0; i < static_cast<int64_t>(n) * kNumParams; ++i)
            x_t.data[static_cast<size_t>(i)] = static_cast<T>(x[static_cast<size_t>(i)]);
        std::vector<std::tuple<int, Tensor<T>, bool>> conds;
        for (const auto& [eid, tok] : tokens) {
            const int nt = tok.dim(1), d = tok.dim(2);
            Tensor<T> rep = Tensor<T>::zeros({n, nt, d});
            for (int b = 0; b < n; ++b)
                std::copy_n(tok.ptr(), static_cast<int64_t>(nt) * d, rep.ptr() + static_cast<int64_t>(b) * nt * d);
            conds.push_back({eid, std::move(rep), true});
        }
        const std::vector<int> ts(static_cast<size_t>(n), t);
        const Tensor<T> pred = igt_forward(model, x_t, ts, conds);
        eps_out.resize(static_cast<size_t>(n) * kNumParams);
        for (int64_t i = 0; i < static_cast<int64_t>(n) * kNumParams; ++i)
            eps_out[static_cast<size_t>(i)] = static_cast<double>(pred.data[static_cast<size_t>(i)]);
    };
}

}  // namespace jcdi

#include "jcdi/diffusion.hpp"

#include <cmath>

#include "jcdi/errors.hpp"

namespace jcdi {

DiffusionSchedule DiffusionSchedule::make(int T, double beta0, double betaT) {
    if (T < 2) throw contract_error("schedule needs at least 2 steps");
    DiffusionSchedule s;
    s.steps = T;
    s.beta.resize(static_cast<size_t>(T));
    s.alpha.resize(static_cast<size_t>(T));
    s.alpha_bar.resize(static_cast<size_t>(T));
    s.sigma.resize(static_cast<size_t>(T));
    double prod = 1.0;
    for (int i = 0; i < T; ++i) {
        const double b = beta0 + (betaT - beta0) * i / (T - 1);  // endpoints inclusive
        s.beta[static_cast<size_t>(i)] = b;
        s.alpha[static_cast<size_t>(i)] = 1.0 - b;
        prod *= 1.0 - b;
        s.alpha_bar[static_cast<size_t>(i)] = prod;
        s.sigma[static_cast<size_t>(i)] = std::sqrt(b);
    }
    return s;
}

static void check_t(int t, const DiffusionSchedule& s) {
    if (t < 1 || t > s.steps) throw contract_error("diffusion step out of range: " + std::to_string(t));
}

Latent q_sample(const Latent& x0, int t, const Latent& eps, const DiffusionSchedule& s) {
    check_t(t, s);
    const double a = std::sqrt(s.alpha_bar_at(t));
    const double b = std::sqrt(1.0 - s.alpha_bar_at(t));
    Latent out;
    for (int i = 0; i < kNumParams; ++i) out[static_cast<size_t>(i)] = a * x0[static_cast<size_t>(i)] + b * eps[static_cast<size_t>(i)];
    return out;
}

Latent p_sample_step(const Latent& x_t, int t, const Latent& eps_pred, const Latent* z,
                     const DiffusionSchedule& s) {
    check_t(t, s);
    if (t == 1 && z != nullptr) throw contract_error("final reverse step takes no noise");
    const double inv_sqrt_a = 1.0 / std::sqrt(s.alpha_at(t));
    const double coef = (1.0 - s.alpha_at(t)) / std::sqrt(1.0 - s.alpha_bar_at(t));
    const double sig = s.sigma_at(t);
    Latent out;
    for (int i = 0; i < kNumParams; ++i) {
        const size_t k = static_cast<size_t>(i);
        out[k] = inv_sqrt_a * (x_t[k] - coef * eps_pred[k]);
        if (z) out[k] += sig * (*z)[k];
    }
    return out;
}

PosteriorSamples sample_posterior(const ParamSpace& space, const BatchDenoiser& eps_fn,
                                  const DiffusionSchedule& sched, int n, uint64_t seed,
                                  const SamplerOptions& opts) {
    if (n < 1) throw contract_error("sample_posterior: n must be positive");
    PosteriorSamples out;
    out.seed = seed;
    out.samples.resize(static_cast<size_t>(n));

    // Start scale: unit by default; optionally matched to the forward
    // terminal marginal sqrt(abar_T * Var_prior + (1 - abar_T)) with the
    // uniform prior variance 1/3 in normalized space.
    const double abar_T = sched.alpha_bar_at(sched.steps);
    const double start_scale =
        opts.matched_terminal_start ? std::sqrt(abar_T / 3.0 + (1.0 - abar_T)) : 1.0;

    const int k = space.size();
    std::vector<double> x;   // batch x 30
    std::vector<double> eps; // batch x 30
    for (int base = 0; base < n; base += opts.batch) {
        const int nb = std::min(opts.batch, n - base);
        std::vector<Rng> rngs;
        rngs.reserve(static_cast<size_t>(nb));
        x.assign(static_cast<size_t>(nb) * kNumParams, 0.0);
        for (int c = 0; c < nb; ++c) {
            rngs.emplace_back(Rng::derive(seed, static_cast<uint64_t>(base + c)));
            for (int i = 0; i < kNumParams; ++i)
                x[static_cast<size_t>(c) * kNumParams + static_cast<size_t>(i)] = start_scale * rngs.back().normal();
        }
        for (int t = sched.steps; t >= 1; --t) {
            eps_fn(x, nb, t, eps);
            if (static_cast<int64_t>(eps.size()) != static_cast<int64_t>(nb) * kNumParams)
                throw contract_error("denoiser returned wrong batch size");
            const double inv_sqrt_a = 1.0 / std::sqrt(sched.alpha_at(t));
            const double coef = (1.0 - sched.alpha_at(t)) / std::sqrt(1.0 - sched.alpha_bar_at(t));
            const double sig = sched.sigma_at(t);
            for (int c = 0; c < nb; ++c) {
                double* xc = x.data() + static_cast<size_t>(c) * kNumParams;
                const double* ec = eps.data() + static_cast<size_t>(c) * kNumParams;
                for (int i = 0; i < kNumParams; ++i) xc[i] = inv_sqrt_a * (xc[i] - coef * ec[i]);
                if (t > 1)
                    for (int i = 0; i < kNumParams; ++i) xc[i] += sig * rngs[static_cast<size_t>(c)].normal();
            }
        }
        for (int c = 0; c < nb; ++c) {
            ParamVector norm;
            for (int i = 0; i < k; ++i) norm[i] = x[static_cast<size_t>(c) * kNumParams + static_cast<size_t>(i)];
            ParamVector phys = denormalize_params(norm, space);
            for (int i = 0; i < k; ++i) {
                if (phys[i] < space.lower(i)) {
                    phys[i] = space.lower(i);
                    ++out.clipped_components;
                } else if (phys[i] > space.upper(i)) {
                    phys[i] = space.upper(i);
                    ++out.clipped_components;
                }
            }
            out.samples[static_cast<size_t>(base + c)] = phys;
        }
    }
    out.preclip_oob_fraction =
        static_cast<double>(out.clipped_components) / (static_cast<double>(n) * k);
    return out;
}

double diffusion_training_loss(const std::vector<Latent>& x0,
                               const std::function<Latent(const Latent& x_t, int t)>& eps_pred,
                               const DiffusionSchedule& sched, Rng& rng) {
    if (x0.empty()) throw contract_error("diffusion_training_loss: empty batch");
    double acc = 0.0;
    for (const Latent& x : x0) {
        const int t = static_cast<int>(rng.uniform_int(1, sched.steps));
        Latent eps;
        for (auto& e : eps) e = rng.normal();
        const Latent x_t = q_sample(x, t, eps, sched);
        const Latent pred = eps_pred(x_t, t);
        for (int i = 0; i < kNumParams; ++i) {
            const double d = eps[static_cast<size_t>(i)] - pred[static_cast<size_t>(i)];
            acc += d * d;
        }
    }
    return acc / (static_cast<double>(x0.size()) * kNumParams);
}

}  // namespace jcdi

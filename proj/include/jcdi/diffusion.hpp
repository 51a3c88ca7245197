#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "jcdi/params.hpp"
#include "jcdi/rng.hpp"

namespace jcdi {

/// DDPM noise schedule over the normalized parameter space. Arrays are
/// 0-indexed; diffusion step t in [1, T] reads index t-1.
struct DiffusionSchedule {
    int steps = 200;
    std::vector<double> beta, alpha, alpha_bar, sigma;

    static DiffusionSchedule make(int T = 200, double beta0 = 1e-4, double betaT = 5e-3);

    double beta_at(int t) const { return beta[static_cast<size_t>(t - 1)]; }
    double alpha_at(int t) const { return alpha[static_cast<size_t>(t - 1)]; }
    double alpha_bar_at(int t) const { return alpha_bar[static_cast<size_t>(t - 1)]; }
    double sigma_at(int t) const { return sigma[static_cast<size_t>(t - 1)]; }
};

using Latent = std::array<double, kNumParams>;

struct NoisedLatent {
    Latent x_t;
    int t = 1;
    Latent eps;
};

/// Forward noising: x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
Latent q_sample(const Latent& x0, int t, const Latent& eps, const DiffusionSchedule& s);

/// One reverse step; z must be null at t = 1 (the final step is noiseless).
Latent p_sample_step(const Latent& x_t, int t, const Latent& eps_pred, const Latent* z,
                     const DiffusionSchedule& s);

/// Batched noise predictor with conditions already bound: reads n latents
/// (row-major n x 30), writes n predictions.
using BatchDenoiser =
    std::function<void(const std::vector<double>& x, int n, int t, std::vector<double>& eps_out)>;

struct SamplerOptions {
    int batch = 512;
    /// Start reverse chains from N(0, I) (the published procedure). The
    /// matched alternative scales the start to the forward-process terminal
    /// variance, for experimentation only.
    bool matched_terminal_start = false;
};

struct PosteriorSamples {
    std::vector<ParamVector> samples;  // physical space, clipped into bounds
    std::vector<std::string> conditioning;
    uint64_t seed = 0;
    int64_t clipped_components = 0;
    double preclip_oob_fraction = 0.0;
};

/// Runs n independent reverse chains from x_T ~ N(0, I), denormalizes the
/// final latents into physical space and clips them into bounds. Chain i
/// draws from Rng(Rng::derive(seed, i)), so the output is a pure function of
/// (seed, conditions, weights) regardless of batch size or thread count.
PosteriorSamples sample_posterior(const ParamSpace& space, const BatchDenoiser& eps_fn,
                                  const DiffusionSchedule& sched, int n, uint64_t seed,
                                  const SamplerOptions& opts = {});

/// Monte-Carlo denoising loss for an arbitrary per-sample predictor; the
/// reference definition the training graph must agree with. Draws t uniform
/// in {1..T} and eps ~ N(0, I) per sample, returns the mean squared error
/// over all samples and components.
double diffusion_training_loss(const std::vector<Latent>& x0,
                               const std::function<Latent(const Latent& x_t, int t)>& eps_pred,
                               const DiffusionSchedule& sched, Rng& rng);

}  // namespace jcdi

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "crownfill/rng.hpp"
#include "crownfill/schedule.hpp"

namespace crownfill {

struct GuidanceConfig {
    double w = 2.0;          // guidance mixing factor
    double dropout_p = 0.10; // probability of omitting the condition in training

    void validate() const;
};

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps. Noise is injected, never
// drawn internally.
std::vector<double> q_sample(std::span<const double> x0, int t,
                             std::span<const double> eps, const NoiseSchedule& schedule);

// eps_hat = eps_uncond + w (eps_cond - eps_uncond), elementwise.
std::vector<double> cfg_mix(std::span<const double> eps_uncond,
                            std::span<const double> eps_cond, double w);

// One reverse transition: posterior mean from the predicted noise plus
// fixed posterior-variance noise; the noise term vanishes at t=1.
std::vector<double> p_sample_step(std::span<const double> predicted_eps,
                                  std::span<const double> x_t, int t,
                                  const NoiseSchedule& schedule, Rng& rng);

// Loss-aware timestep sampler: p_t tracks the square root of the mean of the
// last 10 squared losses at t, mixed with a 0.001 uniform floor. Uniform with
// unit weights until every timestep has a full history.
class SecondMomentResampler {
public:
    explicit SecondMomentResampler(int T, int history = 10);

    struct Draw {
        int t = 1;
        double weight = 1.0;
    };
    Draw sample(Rng& rng) const;
    void update(int t, double loss);

    bool warmed_up() const;
    std::vector<double> probabilities() const;

private:
    int T_;
    int history_;
    std::vector<std::vector<double>> sq_losses_;  // ring buffers
    std::vector<int> cursor_;
    std::vector<int> filled_;
};

}  // namespace crownfill

#pragma once

#include <vector>

namespace crownfill {

// Forward-process tables; index 0 holds timestep t=1.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> betas;
    std::vector<double> alphas;      // 1 - beta
    std::vector<double> alpha_bars;  // cumulative products

    double beta(int t) const { return betas[t - 1]; }
    double alpha(int t) const { return alphas[t - 1]; }
    double alpha_bar(int t) const { return alpha_bars[t - 1]; }
    double alpha_bar_prev(int t) const { return t > 1 ? alpha_bars[t - 2] : 1.0; }

    void validate() const;
    static NoiseSchedule from_betas(std::vector<double> betas);
};

// Linear beta ramp 1e-4 -> 0.02, endpoints scaled by 1000/T and capped
// below 0.999. Alpha-bar products are accumulated in 64-bit.
NoiseSchedule linear_schedule(int T);

struct RespacedSchedule {
    NoiseSchedule chain;            // per-kept-step transition tables
    std::vector<int> kept_indices;  // 1-based timesteps of the base schedule

    // Base timestep to feed the network at respaced position j (1-based).
    int base_timestep(int j) const { return kept_indices[j - 1]; }
};

// Evenly strided subsequence of length target_steps that always includes T;
// transition betas are recomputed from the kept alpha-bar ratios, and the
// kept alpha-bars themselves are copied bit-exactly.
RespacedSchedule respace(const NoiseSchedule& schedule, int target_steps);

}  // namespace crownfill

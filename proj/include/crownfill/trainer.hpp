#pragma once

#include <memory>
#include <optional>
#include <string>

#include "crownfill/augment.hpp"
#include "crownfill/diffusion.hpp"
#include "crownfill/unet.hpp"

namespace crownfill {

class AdamOptimizer {
public:
    explicit AdamOptimizer(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParameterStore& params);
    double learning_rate() const { return lr_; }

private:
    double lr_, beta1_, beta2_, eps_;
    long long t_ = 0;
};

// Grid values are scaled by data_scale before diffusion so targets span
// roughly [-1, 1]; the null condition is a +kTruncation fill (scaled).
inline constexpr double kDataScale = 4.0;

Tensor grid_to_tensor(const SdfGrid& grid, double data_scale = kDataScale);
SdfGrid tensor_to_grid(const Tensor& tensor, const SdfGrid& spec_like,
                       double data_scale = kDataScale);
Tensor null_condition(int resolution, double data_scale = kDataScale);

// One importance-weighted denoising step on a single sample: draw (t, w),
// noise the target, optionally drop the condition (context and antagonist
// jointly), backprop the weighted MSE and apply one optimizer step.
// Returns the unweighted loss; throws NumericError when it goes non-finite.
double train_step(DenoiserNetwork& network, const CompletionSample& sample,
                  const NoiseSchedule& schedule, const GuidanceConfig& guidance,
                  SecondMomentResampler& resampler, AdamOptimizer& optimizer, Rng& rng,
                  double data_scale = kDataScale, bool* dropped_condition = nullptr);

// Respaced reverse chain from pure noise, classifier-free mixed when w != 1.
// Deterministic for a fixed seed and fixed weights.
SdfGrid complete(DenoiserNetwork& network, const NoiseSchedule& schedule, const SdfGrid& context,
                 const SdfGrid* antagonist, int steps, double w, uint64_t seed,
                 double data_scale = kDataScale);

struct Checkpoint {
    UNetConfig config;
    NoiseSchedule schedule;
    GuidanceConfig guidance;
    double data_scale = kDataScale;
    std::vector<std::pair<std::string, std::vector<double>>> tensors;
};

// Versioned binary, bit-exact round trip. Layout documented in the README.
void save_checkpoint(const DenoiserNetwork& network, const NoiseSchedule& schedule,
                     const GuidanceConfig& guidance, double data_scale, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the network from a loaded checkpoint (parameter names must match).
std::unique_ptr<DenoiserNetwork> restore_network(const Checkpoint& ckpt);

}  // namespace crownfill

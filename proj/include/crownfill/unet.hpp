#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crownfill/layers.hpp"
#include "crownfill/tensor.hpp"

namespace crownfill {

struct UNetConfig {
    int resolution = 16;
    int base_channels = 16;
    std::vector<int> channel_mults = {1, 2, 4};
    int time_embed_dim = 0;  // 0 -> 4 * base_channels
    int proj_channels = 0;   // width of the input projections; 0 -> base_channels
    int norm_groups = 8;
    bool antagonist_enabled = true;

    int levels() const { return static_cast<int>(channel_mults.size()); }
    int emb_dim() const { return time_embed_dim > 0 ? time_embed_dim : 4 * base_channels; }
    int proj_dim() const { return proj_channels > 0 ? proj_channels : base_channels; }
    void validate() const;
};

// Denoising UNet with a diffusion branch, a contextual branch and an
// optional antagonist branch. Branch features are summed per level and
// concatenated onto the decoder stream; attention only at the bottleneck.
class DenoiserNetwork {
public:
    DenoiserNetwork(const UNetConfig& config, uint64_t seed);

    // Layers keep pointers into the owned parameter store.
    DenoiserNetwork(const DenoiserNetwork&) = delete;
    DenoiserNetwork& operator=(const DenoiserNetwork&) = delete;
    DenoiserNetwork(DenoiserNetwork&&) = delete;
    DenoiserNetwork& operator=(DenoiserNetwork&&) = delete;

    // x_noisy: (1, R, R, R). x_c / x_a may be null (branch skipped).
    // Null-*filled* tensors are the classifier-free "condition omitted" path.
    Tensor forward(const Tensor& x_noisy, int t, const Tensor* x_c, const Tensor* x_a);

    // Backpropagates d(loss)/d(output); accumulates parameter gradients.
    void backward(const Tensor& grad_output);

    // Input projections: F_c = [proj_eps(x), proj_c(x_c)], F_a likewise.
    std::pair<Tensor, std::optional<Tensor>> project_inputs(const Tensor& x_noisy,
                                                            const Tensor& x_c,
                                                            const Tensor* x_a);

    const UNetConfig& config() const { return config_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }
    long long eval_count() const { return eval_count_; }

private:
    struct Projection {
        Conv3d conv1;
        Silu act;
        Conv3d conv2;
        Tensor forward(const Tensor& x) { return conv2.forward(act.forward(conv1.forward(x))); }
        Tensor backward(const Tensor& g) {
            return conv1.backward(act.backward(conv2.backward(g)));
        }
    };

    struct BranchEncoder {
        std::vector<ResBlock> blocks;
        std::vector<Conv3d> downs;
        std::vector<Conv3d> taps;

        std::vector<Tensor> forward(const Tensor& x, const std::vector<double>& emb);
        Tensor backward(const std::vector<Tensor>& skip_grads, std::vector<double>& grad_emb);
    };

    BranchEncoder make_encoder(const std::string& name, int in_ch, Rng& rng);

    UNetConfig config_;
    ParameterStore params_;

    Projection proj_eps_, proj_c_, proj_a_;
    BranchEncoder enc_eps_, enc_c_, enc_a_;
    ResBlock mid_block1_, mid_block2_;
    AttentionBlock mid_attn_;
    std::vector<ResBlock> dec_blocks_;
    std::vector<Upsample> upsamples_;
    GroupNorm head_norm_;
    Silu head_act_;
    Conv3d head_conv_;
    Linear temb_lin1_, temb_lin2_;

    // forward caches for backward
    bool ran_context_ = false, ran_antagonist_ = false;
    std::vector<double> temb_mid_;  // temb after first linear (pre-silu)
    std::vector<double> emb_;
    long long eval_count_ = 0;
};

struct GradCheckEntry {
    std::string tensor;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_tensor;
    bool pass = false;
    std::vector<GradCheckEntry> entries;
};

struct GradCheckInput {
    Tensor x_noisy;
    int t = 1;
    std::optional<Tensor> x_c;
    std::optional<Tensor> x_a;
    Tensor target_eps;
};

// Central finite differences (h = 1e-4) against the analytic backward pass
// on up to 200 sampled parameters per tensor, all in 64-bit.
GradCheckReport gradient_check(DenoiserNetwork& network, const std::vector<GradCheckInput>& batch,
                               double tolerance, uint64_t seed = 1234);

}  // namespace crownfill

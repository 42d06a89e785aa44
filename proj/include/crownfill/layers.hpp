#pragma once

#include <string>
#include <vector>

#include "crownfill/rng.hpp"
#include "crownfill/tensor.hpp"

namespace crownfill {

// Named parameter tensor with gradient and optimizer slots.
struct ParamTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<double> adam_m;
    std::vector<double> adam_v;

    size_t size() const { return value.size(); }
};

class ParameterStore {
public:
    int add(const std::string& name, std::vector<int> shape);
    ParamTensor& operator[](int id) { return params_[id]; }
    const ParamTensor& operator[](int id) const { return params_[id]; }
    size_t count() const { return params_.size(); }
    std::vector<ParamTensor>& all() { return params_; }
    const std::vector<ParamTensor>& all() const { return params_; }

    void zero_grad();
    size_t total_parameters() const;

private:
    std::vector<ParamTensor> params_;
};

// Layers cache what their backward pass needs; an instance handles one
// forward/backward pair at a time.

class Conv3d {
public:
    // kernel k in {1,3}, stride in {1,2}, pad = k/2.
    Conv3d() = default;
    Conv3d(ParameterStore& store, const std::string& name, int in_ch, int out_ch, int kernel,
           int stride, Rng& rng, bool zero_init = false);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out);

    int weight_id() const { return weight_; }
    int in_channels() const { return in_ch_; }
    int out_channels() const { return out_ch_; }

private:
    ParameterStore* store_ = nullptr;
    int weight_ = -1, bias_ = -1;
    int in_ch_ = 0, out_ch_ = 0, kernel_ = 1, stride_ = 1, pad_ = 0;
    Tensor cached_input_;
};

class Linear {
public:
    Linear() = default;
    Linear(ParameterStore& store, const std::string& name, int in_dim, int out_dim, Rng& rng,
           bool zero_init = false);

    std::vector<double> forward(const std::vector<double>& x);
    std::vector<double> backward(const std::vector<double>& grad_out);

private:
    ParameterStore* store_ = nullptr;
    int weight_ = -1, bias_ = -1;
    int in_dim_ = 0, out_dim_ = 0;
    std::vector<double> cached_input_;
};

class GroupNorm {
public:
    GroupNorm() = default;
    GroupNorm(ParameterStore& store, const std::string& name, int channels, int groups);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out);

private:
    ParameterStore* store_ = nullptr;
    int gamma_ = -1, beta_ = -1;
    int channels_ = 0, groups_ = 0;
    Tensor cached_norm_;  // normalized activations
    std::vector<double> cached_inv_std_;
};

class Silu {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out);

private:
    Tensor cached_input_;
};

// Full single-head self-attention over flattened voxels, with pre-norm and
// residual connection. Used only at the bottleneck.
class AttentionBlock {
public:
    AttentionBlock() = default;
    AttentionBlock(ParameterStore& store, const std::string& name, int channels, Rng& rng);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out);

private:
    GroupNorm norm_;
    Conv3d qkv_;
    Conv3d proj_;
    int channels_ = 0;
    Tensor cached_q_, cached_k_, cached_v_;
    std::vector<double> cached_att_;  // S x S softmax rows
};

// x2 nearest-neighbor upsampling followed by a 3x3x3 conv.
class Upsample {
public:
    Upsample() = default;
    Upsample(ParameterStore& store, const std::string& name, int channels, Rng& rng);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out);

private:
    Conv3d conv_;
    int in_d_ = 0, in_h_ = 0, in_w_ = 0;
};

// Residual block with time-embedding injection after the first conv.
class ResBlock {
public:
    ResBlock() = default;
    ResBlock(ParameterStore& store, const std::string& name, int in_ch, int out_ch, int emb_dim,
             int groups, Rng& rng);

    Tensor forward(const Tensor& x, const std::vector<double>& emb);
    // Returns input grad; adds the embedding grad into grad_emb.
    Tensor backward(const Tensor& grad_out, std::vector<double>& grad_emb);

private:
    GroupNorm gn1_, gn2_;
    Silu act1_, act2_;
    Conv3d conv1_, conv2_, skip_;
    Linear emb_proj_;
    bool has_skip_conv_ = false;
    int out_ch_ = 0;
    Tensor cached_input_;

    // Silu over a plain vector (time embedding path).
    std::vector<double> emb_act_in_;
};

// Sinusoidal timestep features, no parameters.
std::vector<double> timestep_embedding(int t, int dim);

}  // namespace crownfill

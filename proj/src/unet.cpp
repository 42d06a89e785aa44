#include "crownfill/unet.hpp"

#include <cmath>

#include "crownfill/error.hpp"

namespace crownfill {

void UNetConfig::validate() const {
    if (base_channels < 4) throw ValidationError("UNetConfig: base_channels must be >= 4");
    if (channel_mults.empty()) throw ValidationError("UNetConfig: channel_mults empty");
    int down = 1 << (levels() - 1);
    if (resolution % down != 0)
        throw ValidationError("UNetConfig: resolution must be divisible by 2^(levels-1)");
    if (resolution / down < 1) throw ValidationError("UNetConfig: too many levels");
}

std::vector<Tensor> DenoiserNetwork::BranchEncoder::forward(const Tensor& x,
                                                            const std::vector<double>& emb) {
    std::vector<Tensor> skips;
    Tensor cur = x;
    const int levels = static_cast<int>(blocks.size());
    for (int i = 0; i < levels; ++i) {
        cur = blocks[i].forward(cur, emb);
        skips.push_back(taps[i].forward(cur));
        if (i + 1 < levels) cur = downs[i].forward(cur);
    }
    return skips;
}

Tensor DenoiserNetwork::BranchEncoder::backward(const std::vector<Tensor>& skip_grads,
                                                std::vector<double>& grad_emb) {
    const int levels = static_cast<int>(blocks.size());
    Tensor g_deeper;
    for (int i = levels - 1; i >= 0; --i) {
        Tensor g_level = taps[i].backward(skip_grads[i]);
        if (i + 1 < levels) g_level += downs[i].backward(g_deeper);
        g_deeper = blocks[i].backward(g_level, grad_emb);
    }
    return g_deeper;
}

DenoiserNetwork::BranchEncoder DenoiserNetwork::make_encoder(const std::string& name, int in_ch,
                                                             Rng& rng) {
    BranchEncoder enc;
    const int levels = config_.levels();
    int prev = in_ch;
    for (int i = 0; i < levels; ++i) {
        int ch = config_.base_channels * config_.channel_mults[i];
        enc.blocks.emplace_back(params_, name + ".level" + std::to_string(i) + ".block", prev, ch,
                                config_.emb_dim(), config_.norm_groups, rng);
        enc.taps.emplace_back(params_, name + ".level" + std::to_string(i) + ".tap", ch, ch, 1, 1,
                              rng);
        if (i + 1 < levels)
            enc.downs.emplace_back(params_, name + ".level" + std::to_string(i) + ".down", ch, ch,
                                   3, 2, rng);
        prev = ch;
    }
    return enc;
}

DenoiserNetwork::DenoiserNetwork(const UNetConfig& config, uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);
    const int P = config_.proj_dim();
    const int levels = config_.levels();
    const int emb_dim = config_.emb_dim();
    const int top_ch = config_.base_channels * config_.channel_mults[levels - 1];

    temb_lin1_ = Linear(params_, "temb.lin1", 2 * config_.base_channels, emb_dim, rng);
    temb_lin2_ = Linear(params_, "temb.lin2", emb_dim, emb_dim, rng);

    proj_eps_ = {Conv3d(params_, "proj_eps.conv1", 1, P, 1, 1, rng), {},
                 Conv3d(params_, "proj_eps.conv2", P, P, 1, 1, rng)};
    proj_c_ = {Conv3d(params_, "proj_c.conv1", 1, P, 1, 1, rng), {},
               Conv3d(params_, "proj_c.conv2", P, P, 1, 1, rng)};
    enc_eps_ = make_encoder("enc_eps", P, rng);
    enc_c_ = make_encoder("enc_c", 2 * P, rng);
    if (config_.antagonist_enabled) {
        proj_a_ = {Conv3d(params_, "proj_a.conv1", 1, P, 1, 1, rng), {},
                   Conv3d(params_, "proj_a.conv2", P, P, 1, 1, rng)};
        enc_a_ = make_encoder("enc_a", 2 * P, rng);
    }

    mid_block1_ = ResBlock(params_, "mid.block1", top_ch, top_ch, emb_dim, config_.norm_groups, rng);
    mid_attn_ = AttentionBlock(params_, "mid.attn", top_ch, rng);
    mid_block2_ = ResBlock(params_, "mid.block2", top_ch, top_ch, emb_dim, config_.norm_groups, rng);

    for (int i = 0; i < levels; ++i) {
        int ch = config_.base_channels * config_.channel_mults[i];
        int prev_ch = i + 1 < levels ? config_.base_channels * config_.channel_mults[i + 1] : top_ch;
        dec_blocks_.emplace_back(params_, "dec.level" + std::to_string(i) + ".block",
                                 prev_ch + ch, ch, emb_dim, config_.norm_groups, rng);
        if (i > 0)
            upsamples_.emplace_back(params_, "dec.level" + std::to_string(i) + ".up", ch, rng);
    }

    int g = std::min(config_.norm_groups, config_.base_channels);
    while (config_.base_channels % g != 0) --g;
    head_norm_ = GroupNorm(params_, "head.norm", config_.base_channels, g);
    head_conv_ = Conv3d(params_, "head.conv", config_.base_channels, 1, 3, 1, rng,
                        /*zero_init=*/true);
}

std::pair<Tensor, std::optional<Tensor>> DenoiserNetwork::project_inputs(const Tensor& x_noisy,
                                                                         const Tensor& x_c,
                                                                         const Tensor* x_a) {
    if (!x_noisy.same_shape(x_c))
        throw ValidationError("project_inputs: spatial mismatch between noisy input and context");
    if (x_a && !x_noisy.same_shape(*x_a))
        throw ValidationError("project_inputs: spatial mismatch between noisy input and antagonist");
    Tensor pe = proj_eps_.forward(x_noisy);
    Tensor fc = concat_channels(pe, proj_c_.forward(x_c));
    std::optional<Tensor> fa;
    if (x_a) {
        if (!config_.antagonist_enabled)
            throw ValidationError("project_inputs: antagonist branch disabled");
        fa = concat_channels(pe, proj_a_.forward(*x_a));
    }
    return {std::move(fc), std::move(fa)};
}

Tensor DenoiserNetwork::forward(const Tensor& x_noisy, int t, const Tensor* x_c,
                                const Tensor* x_a) {
    if (x_noisy.c != 1 || x_noisy.d != config_.resolution || x_noisy.h != config_.resolution ||
        x_noisy.w != config_.resolution)
        throw ValidationError("DenoiserNetwork: input does not match configured resolution");
    if (x_a && !config_.antagonist_enabled)
        throw ValidationError("DenoiserNetwork: antagonist given but branch disabled");
    if (x_c && !x_noisy.same_shape(*x_c))
        throw ValidationError("DenoiserNetwork: context shape mismatch");
    if (x_a && !x_noisy.same_shape(*x_a))
        throw ValidationError("DenoiserNetwork: antagonist shape mismatch");
    ++eval_count_;

    // time embedding MLP
    std::vector<double> sin_emb = timestep_embedding(t, 2 * config_.base_channels);
    temb_mid_ = temb_lin1_.forward(sin_emb);
    std::vector<double> temb_act(temb_mid_.size());
    for (size_t i = 0; i < temb_mid_.size(); ++i)
        temb_act[i] = temb_mid_[i] / (1.0 + std::exp(-temb_mid_[i]));
    emb_ = temb_lin2_.forward(temb_act);

    Tensor pe = proj_eps_.forward(x_noisy);
    std::vector<Tensor> sums = enc_eps_.forward(pe, emb_);

    ran_context_ = x_c != nullptr;
    if (ran_context_) {
        Tensor fc = concat_channels(pe, proj_c_.forward(*x_c));
        std::vector<Tensor> skips_c = enc_c_.forward(fc, emb_);
        for (size_t i = 0; i < sums.size(); ++i) sums[i] += skips_c[i];
    }
    ran_antagonist_ = x_a != nullptr;
    if (ran_antagonist_) {
        Tensor fa = concat_channels(pe, proj_a_.forward(*x_a));
        std::vector<Tensor> skips_a = enc_a_.forward(fa, emb_);
        for (size_t i = 0; i < sums.size(); ++i) sums[i] += skips_a[i];
    }

    const int levels = config_.levels();
    Tensor d = mid_block2_.forward(mid_attn_.forward(mid_block1_.forward(sums[levels - 1], emb_)),
                                   emb_);
    for (int i = levels - 1; i >= 0; --i) {
        Tensor cat = concat_channels(d, sums[i]);
        d = dec_blocks_[i].forward(cat, emb_);
        if (i > 0) d = upsamples_[i - 1].forward(d);
    }
    return head_conv_.forward(head_act_.forward(head_norm_.forward(d)));
}

void DenoiserNetwork::backward(const Tensor& grad_output) {
    const int levels = config_.levels();
    std::vector<double> grad_emb(emb_.size(), 0.0);

    Tensor g = head_norm_.backward(head_act_.backward(head_conv_.backward(grad_output)));

    std::vector<Tensor> grad_sums(levels);
    for (int i = 0; i <= levels - 1; ++i) {
        if (i > 0) g = upsamples_[i - 1].backward(g);
        Tensor g_cat = dec_blocks_[i].backward(g, grad_emb);
        int prev_ch = i + 1 < levels
                          ? config_.base_channels * config_.channel_mults[i + 1]
                          : config_.base_channels * config_.channel_mults[levels - 1];
        Tensor g_prev, g_skip;
        split_channels(g_cat, prev_ch, g_prev, g_skip);
        grad_sums[i] = std::move(g_skip);
        g = std::move(g_prev);
    }

    // g now holds the grad of the middle-block output
    Tensor g_mid_in = mid_block1_.backward(
        mid_attn_.backward(mid_block2_.backward(g, grad_emb)), grad_emb);
    grad_sums[levels - 1] += g_mid_in;

    const int P = config_.proj_dim();
    Tensor g_pe = enc_eps_.backward(grad_sums, grad_emb);
    if (ran_antagonist_) {
        Tensor g_fa = enc_a_.backward(grad_sums, grad_emb);
        Tensor g_pe_a, g_pa;
        split_channels(g_fa, P, g_pe_a, g_pa);
        g_pe += g_pe_a;
        proj_a_.backward(g_pa);
    }
    if (ran_context_) {
        Tensor g_fc = enc_c_.backward(grad_sums, grad_emb);
        Tensor g_pe_c, g_pc;
        split_channels(g_fc, P, g_pe_c, g_pc);
        g_pe += g_pe_c;
        proj_c_.backward(g_pc);
    }
    proj_eps_.backward(g_pe);

    // time-embedding MLP backward
    std::vector<double> g_act = temb_lin2_.backward(grad_emb);
    for (size_t i = 0; i < g_act.size(); ++i) {
        double s = 1.0 / (1.0 + std::exp(-temb_mid_[i]));
        g_act[i] *= s * (1.0 + temb_mid_[i] * (1.0 - s));
    }
    temb_lin1_.backward(g_act);
}

GradCheckReport gradient_check(DenoiserNetwork& network, const std::vector<GradCheckInput>& batch,
                               double tolerance, uint64_t seed) {
    auto loss_fn = [&]() {
        double total = 0.0;
        for (const auto& item : batch) {
            Tensor pred = network.forward(item.x_noisy, item.t,
                                          item.x_c ? &*item.x_c : nullptr,
                                          item.x_a ? &*item.x_a : nullptr);
            double acc = 0.0;
            for (size_t i = 0; i < pred.data.size(); ++i) {
                double r = pred.data[i] - item.target_eps.data[i];
                acc += r * r;
            }
            total += acc / static_cast<double>(pred.data.size());
        }
        return total / static_cast<double>(batch.size());
    };

    // analytic gradients
    network.params().zero_grad();
    for (const auto& item : batch) {
        Tensor pred = network.forward(item.x_noisy, item.t, item.x_c ? &*item.x_c : nullptr,
                                      item.x_a ? &*item.x_a : nullptr);
        Tensor grad(pred.c, pred.d, pred.h, pred.w);
        double scale = 2.0 / (static_cast<double>(pred.data.size()) * batch.size());
        for (size_t i = 0; i < pred.data.size(); ++i)
            grad.data[i] = scale * (pred.data[i] - item.target_eps.data[i]);
        network.backward(grad);
    }
    std::vector<std::vector<double>> analytic;
    for (const auto& p : network.params().all()) analytic.push_back(p.grad);

    GradCheckReport report;
    Rng rng(seed);
    const double h = 1e-4;
    for (size_t pi = 0; pi < network.params().count(); ++pi) {
        auto& p = network.params()[static_cast<int>(pi)];
        GradCheckEntry entry;
        entry.tensor = p.name;
        size_t n = p.size();
        size_t samples = std::min<size_t>(200, n);
        for (size_t s = 0; s < samples; ++s) {
            size_t idx = samples == n ? s : static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(n) - 1));
            double saved = p.value[idx];
            p.value[idx] = saved + h;
            double lp = loss_fn();
            p.value[idx] = saved - h;
            double lm = loss_fn();
            p.value[idx] = saved;
            double numeric = (lp - lm) / (2.0 * h);
            double exact = analytic[pi][idx];
            double rel = std::fabs(exact - numeric) /
                         std::max({std::fabs(exact), std::fabs(numeric), 1e-6});
            entry.max_rel_error = std::max(entry.max_rel_error, rel);
        }
        if (entry.max_rel_error > report.max_rel_error) {
            report.max_rel_error = entry.max_rel_error;
            report.worst_tensor = entry.tensor;
        }
        report.entries.push_back(entry);
    }
    report.pass = report.max_rel_error < tolerance;
    return report;
}

}  // namespace crownfill

#include "crownfill/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "crownfill/error.hpp"

namespace crownfill {

void AdamOptimizer::step(ParameterStore& params) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& p : params.all()) {
        for (size_t i = 0; i < p.size(); ++i) {
            double g = p.grad[i];
            p.adam_m[i] = beta1_ * p.adam_m[i] + (1.0 - beta1_) * g;
            p.adam_v[i] = beta2_ * p.adam_v[i] + (1.0 - beta2_) * g * g;
            double mhat = p.adam_m[i] / bc1;
            double vhat = p.adam_v[i] / bc2;
            p.value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

Tensor grid_to_tensor(const SdfGrid& grid, double data_scale) {
    const int n = grid.resolution();
    Tensor t(1, n, n, n);
    for (size_t i = 0; i < grid.voxel_count(); ++i)
        t.data[i] = static_cast<double>(grid.values()[i]) * data_scale;
    return t;
}

SdfGrid tensor_to_grid(const Tensor& tensor, const SdfGrid& spec_like, double data_scale) {
    SdfGrid out(spec_like.resolution(), spec_like.origin(), spec_like.spacing());
    for (size_t i = 0; i < out.voxel_count(); ++i)
        out.values()[i] = static_cast<float>(clamp(tensor.data[i] / data_scale,
                                                   -static_cast<double>(kTruncation),
                                                   static_cast<double>(kTruncation)));
    return out;
}

Tensor null_condition(int resolution, double data_scale) {
    Tensor t(1, resolution, resolution, resolution);
    std::fill(t.data.begin(), t.data.end(), static_cast<double>(kTruncation) * data_scale);
    return t;
}

double train_step(DenoiserNetwork& network, const CompletionSample& sample,
                  const NoiseSchedule& schedule, const GuidanceConfig& guidance,
                  SecondMomentResampler& resampler, AdamOptimizer& optimizer, Rng& rng,
                  double data_scale, bool* dropped_condition) {
    guidance.validate();
    const int res = network.config().resolution;
    if (sample.ground_truth.resolution() != res)
        throw ValidationError("train_step: sample resolution does not match network");

    Tensor x0 = grid_to_tensor(sample.ground_truth, data_scale);
    auto draw = resampler.sample(rng);

    Tensor eps(1, res, res, res);
    for (double& v : eps.data) v = rng.normal();

    double ab = schedule.alpha_bar(draw.t);
    double c0 = std::sqrt(ab), c1 = std::sqrt(1.0 - ab);
    Tensor xt(1, res, res, res);
    for (size_t i = 0; i < xt.data.size(); ++i) xt.data[i] = c0 * x0.data[i] + c1 * eps.data[i];

    bool drop = rng.uniform() < guidance.dropout_p;
    if (dropped_condition) *dropped_condition = drop;

    Tensor x_c = drop ? null_condition(res, data_scale) : grid_to_tensor(sample.context, data_scale);
    std::optional<Tensor> x_a;
    if (network.config().antagonist_enabled && sample.antagonist)
        x_a = drop ? null_condition(res, data_scale) : grid_to_tensor(*sample.antagonist, data_scale);

    Tensor pred = network.forward(xt, draw.t, &x_c, x_a ? &*x_a : nullptr);

    double loss = 0.0;
    Tensor grad(1, res, res, res);
    const double inv_n = 1.0 / static_cast<double>(pred.data.size());
    for (size_t i = 0; i < pred.data.size(); ++i) {
        double r = pred.data[i] - eps.data[i];
        loss += r * r;
        grad.data[i] = draw.weight * 2.0 * r * inv_n;
    }
    loss *= inv_n;
    if (!std::isfinite(loss)) throw NumericError("train_step: non-finite loss");

    network.params().zero_grad();
    network.backward(grad);
    resampler.update(draw.t, loss);
    optimizer.step(network.params());
    return loss;
}

SdfGrid complete(DenoiserNetwork& network, const NoiseSchedule& schedule, const SdfGrid& context,
                 const SdfGrid* antagonist, int steps, double w, uint64_t seed,
                 double data_scale) {
    const int res = network.config().resolution;
    if (context.resolution() != res)
        throw ValidationError("complete: context resolution does not match network");
    if (antagonist && !antagonist->same_spec(context))
        throw ValidationError("complete: antagonist grid spec mismatch");

    RespacedSchedule respaced = respace(schedule, steps);
    Rng rng(seed);

    Tensor x(1, res, res, res);
    for (double& v : x.data) v = rng.normal();

    Tensor x_c = grid_to_tensor(context, data_scale);
    std::optional<Tensor> x_a;
    bool use_antagonist = antagonist && network.config().antagonist_enabled;
    if (use_antagonist) x_a = grid_to_tensor(*antagonist, data_scale);

    Tensor null_c = null_condition(res, data_scale);
    std::optional<Tensor> null_a;
    if (use_antagonist) null_a = null_condition(res, data_scale);

    const double bound = static_cast<double>(kTruncation) * data_scale;
    for (int j = respaced.chain.T; j >= 1; --j) {
        int t_base = respaced.base_timestep(j);
        Tensor eps_cond = network.forward(x, t_base, &x_c, x_a ? &*x_a : nullptr);

        std::vector<double> eps_hat;
        if (w == 1.0) {
            eps_hat = std::move(eps_cond.data);
        } else {
            Tensor eps_uncond = network.forward(x, t_base, &null_c, null_a ? &*null_a : nullptr);
            eps_hat = cfg_mix(eps_uncond.data, eps_cond.data, w);
        }

        // clip the implied clean sample to the data range and fold the clip
        // back into eps-hat, keeping the chain on bounded targets
        double ab = respaced.chain.alpha_bar(j);
        double c0 = std::sqrt(ab), c1 = std::sqrt(1.0 - ab);
        for (size_t i = 0; i < eps_hat.size(); ++i) {
            double x0_hat = (x.data[i] - c1 * eps_hat[i]) / c0;
            x0_hat = clamp(x0_hat, -bound, bound);
            eps_hat[i] = (x.data[i] - c0 * x0_hat) / c1;
        }
        x.data = p_sample_step(eps_hat, x.data, j, respaced.chain, rng);
    }
    return tensor_to_grid(x, context, data_scale);
}

namespace {

constexpr uint32_t kCkptVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u32(os, static_cast<uint32_t>(bits));
    put_u32(os, static_cast<uint32_t>(bits >> 32));
}

double get_f64(std::istream& is) {
    uint64_t lo = get_u32(is);
    uint64_t hi = get_u32(is);
    uint64_t bits = lo | (hi << 32);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_str(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& is) {
    uint32_t n = get_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    return s;
}

}  // namespace

void save_checkpoint(const DenoiserNetwork& network, const NoiseSchedule& schedule,
                     const GuidanceConfig& guidance, double data_scale, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("save_checkpoint: cannot open " + path);
    os.write("CFCK", 4);
    put_u32(os, kCkptVersion);

    put_u32(os, static_cast<uint32_t>(schedule.T));
    for (double b : schedule.betas) put_f64(os, b);

    put_f64(os, guidance.w);
    put_f64(os, guidance.dropout_p);
    put_f64(os, data_scale);

    const UNetConfig& cfg = network.config();
    put_u32(os, static_cast<uint32_t>(cfg.resolution));
    put_u32(os, static_cast<uint32_t>(cfg.base_channels));
    put_u32(os, static_cast<uint32_t>(cfg.channel_mults.size()));
    for (int m : cfg.channel_mults) put_u32(os, static_cast<uint32_t>(m));
    put_u32(os, static_cast<uint32_t>(cfg.time_embed_dim));
    put_u32(os, static_cast<uint32_t>(cfg.proj_channels));
    put_u32(os, static_cast<uint32_t>(cfg.norm_groups));
    put_u32(os, cfg.antagonist_enabled ? 1 : 0);

    put_u32(os, static_cast<uint32_t>(network.params().count()));
    for (const auto& p : network.params().all()) {
        put_str(os, p.name);
        put_u32(os, static_cast<uint32_t>(p.shape.size()));
        for (int d : p.shape) put_u32(os, static_cast<uint32_t>(d));
        for (double v : p.value) put_f64(os, v);
    }
    if (!os) throw IoError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "CFCK", 4) != 0)
        throw ValidationError("load_checkpoint: bad magic in " + path);
    uint32_t version = get_u32(is);
    if (version != kCkptVersion)
        throw ValidationError("load_checkpoint: unsupported version " + std::to_string(version));

    Checkpoint ckpt;
    uint32_t T = get_u32(is);
    std::vector<double> betas(T);
    for (auto& b : betas) b = get_f64(is);
    ckpt.schedule = NoiseSchedule::from_betas(std::move(betas));

    ckpt.guidance.w = get_f64(is);
    ckpt.guidance.dropout_p = get_f64(is);
    ckpt.data_scale = get_f64(is);

    ckpt.config.resolution = static_cast<int>(get_u32(is));
    ckpt.config.base_channels = static_cast<int>(get_u32(is));
    uint32_t n_mults = get_u32(is);
    ckpt.config.channel_mults.resize(n_mults);
    for (auto& m : ckpt.config.channel_mults) m = static_cast<int>(get_u32(is));
    ckpt.config.time_embed_dim = static_cast<int>(get_u32(is));
    ckpt.config.proj_channels = static_cast<int>(get_u32(is));
    ckpt.config.norm_groups = static_cast<int>(get_u32(is));
    ckpt.config.antagonist_enabled = get_u32(is) != 0;

    uint32_t count = get_u32(is);
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = get_str(is);
        uint32_t ndims = get_u32(is);
        size_t n = 1;
        for (uint32_t d = 0; d < ndims; ++d) n *= get_u32(is);
        std::vector<double> values(n);
        for (auto& v : values) v = get_f64(is);
        ckpt.tensors.emplace_back(std::move(name), std::move(values));
    }
    if (!is) throw IoError("load_checkpoint: truncated file " + path);
    return ckpt;
}

std::unique_ptr<DenoiserNetwork> restore_network(const Checkpoint& ckpt) {
    auto network = std::make_unique<DenoiserNetwork>(ckpt.config, /*seed=*/0);
    if (ckpt.tensors.size() != network->params().count())
        throw ValidationError("restore_network: parameter count mismatch");
    for (size_t i = 0; i < ckpt.tensors.size(); ++i) {
        auto& p = network->params()[static_cast<int>(i)];
        if (p.name != ckpt.tensors[i].first)
            throw ValidationError("restore_network: parameter name mismatch at " + p.name);
        if (p.value.size() != ckpt.tensors[i].second.size())
            throw ValidationError("restore_network: parameter size mismatch at " + p.name);
        p.value = ckpt.tensors[i].second;
    }
    return network;
}

}  // namespace crownfill

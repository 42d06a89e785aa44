#include "crownfill/layers.hpp"

#include <cmath>

#include "crownfill/error.hpp"

namespace crownfill {

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.d != b.d || a.h != b.h || a.w != b.w)
        throw ValidationError("concat_channels: spatial mismatch");
    Tensor out(a.c + b.c, a.d, a.h, a.w);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
}

void split_channels(const Tensor& grad, int c_first, Tensor& grad_a, Tensor& grad_b) {
    grad_a = Tensor(c_first, grad.d, grad.h, grad.w);
    grad_b = Tensor(grad.c - c_first, grad.d, grad.h, grad.w);
    std::copy(grad.data.begin(), grad.data.begin() + grad_a.data.size(), grad_a.data.begin());
    std::copy(grad.data.begin() + grad_a.data.size(), grad.data.end(), grad_b.data.begin());
}

int ParameterStore::add(const std::string& name, std::vector<int> shape) {
    size_t n = 1;
    for (int s : shape) n *= static_cast<size_t>(s);
    ParamTensor p;
    p.name = name;
    p.shape = std::move(shape);
    p.value.assign(n, 0.0);
    p.grad.assign(n, 0.0);
    p.adam_m.assign(n, 0.0);
    p.adam_v.assign(n, 0.0);
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size()) - 1;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

size_t ParameterStore::total_parameters() const {
    size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
}

namespace {

void fan_in_init(std::vector<double>& w, size_t fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : w) v = rng.uniform(-bound, bound);
}

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }
inline double silu_grad(double x) {
    double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

}  // namespace

Conv3d::Conv3d(ParameterStore& store, const std::string& name, int in_ch, int out_ch, int kernel,
               int stride, Rng& rng, bool zero_init)
    : store_(&store), in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride),
      pad_(kernel / 2) {
    weight_ = store.add(name + ".weight", {out_ch, in_ch, kernel, kernel, kernel});
    bias_ = store.add(name + ".bias", {out_ch});
    if (!zero_init) {
        size_t fan_in = static_cast<size_t>(in_ch) * kernel * kernel * kernel;
        fan_in_init(store[weight_].value, fan_in, rng);
        fan_in_init(store[bias_].value, fan_in, rng);
    }
}

Tensor Conv3d::forward(const Tensor& x) {
    if (x.c != in_ch_) throw ValidationError("Conv3d: channel mismatch");
    cached_input_ = x;
    const int od = (x.d + 2 * pad_ - kernel_) / stride_ + 1;
    const int oh = (x.h + 2 * pad_ - kernel_) / stride_ + 1;
    const int ow = (x.w + 2 * pad_ - kernel_) / stride_ + 1;
    Tensor out(out_ch_, od, oh, ow);

    const double* wgt = store_->operator[](weight_).value.data();
    const double* bias = store_->operator[](bias_).value.data();
    const int k = kernel_, s = stride_, p = pad_;
    const size_t ksize = static_cast<size_t>(k) * k * k;

    if (k == 3 && s == 1 && ow >= 2) {
        // hot path: row-fused accumulation, interior x vectorized
#pragma omp parallel for schedule(static)
        for (int oc = 0; oc < out_ch_; ++oc) {
            double* oc_data = out.channel(oc);
            const size_t oplane = static_cast<size_t>(oh) * ow;
            std::vector<double> acc(ow);
            for (int z = 0; z < od; ++z)
                for (int y = 0; y < oh; ++y) {
                    std::fill(acc.begin(), acc.end(), bias[oc]);
                    for (int ic = 0; ic < in_ch_; ++ic) {
                        const double* ic_data = x.channel(ic);
                        const double* wk = wgt + (static_cast<size_t>(oc) * in_ch_ + ic) * 27;
                        for (int dz = 0; dz < 3; ++dz) {
                            int zi = z + dz - 1;
                            if (zi < 0 || zi >= x.d) continue;
                            for (int dy = 0; dy < 3; ++dy) {
                                int yi = y + dy - 1;
                                if (yi < 0 || yi >= x.h) continue;
                                const double* irow =
                                    ic_data + (static_cast<size_t>(zi) * x.h + yi) * x.w;
                                const double w0 = wk[(dz * 3 + dy) * 3];
                                const double w1 = wk[(dz * 3 + dy) * 3 + 1];
                                const double w2 = wk[(dz * 3 + dy) * 3 + 2];
                                acc[0] += w1 * irow[0] + w2 * irow[1];
                                for (int xx = 1; xx < ow - 1; ++xx)
                                    acc[xx] += w0 * irow[xx - 1] + w1 * irow[xx] + w2 * irow[xx + 1];
                                acc[ow - 1] += w0 * irow[ow - 2] + w1 * irow[ow - 1];
                            }
                        }
                    }
                    std::copy(acc.begin(), acc.end(),
                              oc_data + z * oplane + static_cast<size_t>(y) * ow);
                }
        }
        return out;
    }

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < out_ch_; ++oc) {
        double* oc_data = out.channel(oc);
        const size_t oplane = static_cast<size_t>(oh) * ow;
        for (size_t i = 0; i < out.spatial(); ++i) oc_data[i] = bias[oc];
        for (int ic = 0; ic < in_ch_; ++ic) {
            const double* ic_data = x.channel(ic);
            const double* wk = wgt + (static_cast<size_t>(oc) * in_ch_ + ic) * ksize;
            for (int dz = 0; dz < k; ++dz)
                for (int dy = 0; dy < k; ++dy)
                    for (int dx = 0; dx < k; ++dx) {
                        const double wv = wk[(dz * k + dy) * k + dx];
                        for (int z = 0; z < od; ++z) {
                            int zi = z * s + dz - p;
                            if (zi < 0 || zi >= x.d) continue;
                            for (int y = 0; y < oh; ++y) {
                                int yi = y * s + dy - p;
                                if (yi < 0 || yi >= x.h) continue;
                                double* orow = oc_data + z * oplane + static_cast<size_t>(y) * ow;
                                const double* irow =
                                    ic_data + (static_cast<size_t>(zi) * x.h + yi) * x.w;
                                int x0 = 0, x1 = ow;
                                // valid xi = x*s + dx - p in [0, x.w)
                                while (x0 < ow && x0 * s + dx - p < 0) ++x0;
                                while (x1 > x0 && (x1 - 1) * s + dx - p >= x.w) --x1;
                                const int off = dx - p;
                                if (s == 1) {
                                    for (int xx = x0; xx < x1; ++xx)
                                        orow[xx] += wv * irow[xx + off];
                                } else {
                                    for (int xx = x0; xx < x1; ++xx)
                                        orow[xx] += wv * irow[xx * s + off];
                                }
                            }
                        }
                    }
        }
    }
    return out;
}

Tensor Conv3d::backward(const Tensor& grad_out) {
    const Tensor& x = cached_input_;
    Tensor grad_in(x.c, x.d, x.h, x.w);
    auto& wp = store_->operator[](weight_);
    auto& bp = store_->operator[](bias_);
    const double* wgt = wp.value.data();
    const int k = kernel_, s = stride_, p = pad_;
    const size_t ksize = static_cast<size_t>(k) * k * k;
    const int od = grad_out.d, oh = grad_out.h, ow = grad_out.w;
    const size_t oplane = static_cast<size_t>(oh) * ow;

    // bias grads
    for (int oc = 0; oc < out_ch_; ++oc) {
        const double* g = grad_out.channel(oc);
        double acc = 0.0;
        for (size_t i = 0; i < grad_out.spatial(); ++i) acc += g[i];
        bp.grad[oc] += acc;
    }

    if (k == 3 && s == 1 && ow >= 2 && x.w >= 2) {
        // weight grads: 9 row-dot triples per (oc, ic)
#pragma omp parallel for schedule(static)
        for (int oc = 0; oc < out_ch_; ++oc) {
            const double* g = grad_out.channel(oc);
            for (int ic = 0; ic < in_ch_; ++ic) {
                const double* ic_data = x.channel(ic);
                double w27[27] = {0};
                for (int z = 0; z < od; ++z)
                    for (int y = 0; y < oh; ++y) {
                        const double* grow = g + z * oplane + static_cast<size_t>(y) * ow;
                        for (int dz = 0; dz < 3; ++dz) {
                            int zi = z + dz - 1;
                            if (zi < 0 || zi >= x.d) continue;
                            for (int dy = 0; dy < 3; ++dy) {
                                int yi = y + dy - 1;
                                if (yi < 0 || yi >= x.h) continue;
                                const double* irow =
                                    ic_data + (static_cast<size_t>(zi) * x.h + yi) * x.w;
                                double d0 = 0.0, d1 = 0.0, d2 = 0.0;
                                d1 += grow[0] * irow[0];
                                d2 += grow[0] * irow[1];
                                for (int xx = 1; xx < ow - 1; ++xx) {
                                    d0 += grow[xx] * irow[xx - 1];
                                    d1 += grow[xx] * irow[xx];
                                    d2 += grow[xx] * irow[xx + 1];
                                }
                                d0 += grow[ow - 1] * irow[ow - 2];
                                d1 += grow[ow - 1] * irow[ow - 1];
                                w27[(dz * 3 + dy) * 3] += d0;
                                w27[(dz * 3 + dy) * 3 + 1] += d1;
                                w27[(dz * 3 + dy) * 3 + 2] += d2;
                            }
                        }
                    }
                double* wg = wp.grad.data() + (static_cast<size_t>(oc) * in_ch_ + ic) * 27;
                for (int i = 0; i < 27; ++i) wg[i] += w27[i];
            }
        }

        // input grads: correlation of grad_out with the flipped kernel
#pragma omp parallel for schedule(static)
        for (int ic = 0; ic < in_ch_; ++ic) {
            double* gi = grad_in.channel(ic);
            std::vector<double> acc(x.w);
            for (int zi = 0; zi < x.d; ++zi)
                for (int yi = 0; yi < x.h; ++yi) {
                    std::fill(acc.begin(), acc.end(), 0.0);
                    for (int oc = 0; oc < out_ch_; ++oc) {
                        const double* g = grad_out.channel(oc);
                        const double* wk = wgt + (static_cast<size_t>(oc) * in_ch_ + ic) * 27;
                        for (int dz = 0; dz < 3; ++dz) {
                            int z = zi + 1 - dz;
                            if (z < 0 || z >= od) continue;
                            for (int dy = 0; dy < 3; ++dy) {
                                int y = yi + 1 - dy;
                                if (y < 0 || y >= oh) continue;
                                const double* grow = g + z * oplane + static_cast<size_t>(y) * ow;
                                // flipped taps: acc[xi] += w[dx] * grow[xi + 1 - dx]
                                const double w0 = wk[(dz * 3 + dy) * 3];
                                const double w1 = wk[(dz * 3 + dy) * 3 + 1];
                                const double w2 = wk[(dz * 3 + dy) * 3 + 2];
                                acc[0] += w1 * grow[0] + w0 * grow[1];
                                for (int xx = 1; xx < x.w - 1; ++xx)
                                    acc[xx] += w2 * grow[xx - 1] + w1 * grow[xx] + w0 * grow[xx + 1];
                                acc[x.w - 1] += w2 * grow[x.w - 2] + w1 * grow[x.w - 1];
                            }
                        }
                    }
                    double* irow = gi + (static_cast<size_t>(zi) * x.h + yi) * x.w;
                    for (int xx = 0; xx < x.w; ++xx) irow[xx] += acc[xx];
                }
        }
        return grad_in;
    }

    // weight grads: dW[oc,ic,dz,dy,dx] = sum_out g[oc,o] * x[ic, o*s + d - p]
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < out_ch_; ++oc) {
        const double* g = grad_out.channel(oc);
        for (int ic = 0; ic < in_ch_; ++ic) {
            const double* ic_data = x.channel(ic);
            double* wg = wp.grad.data() + (static_cast<size_t>(oc) * in_ch_ + ic) * ksize;
            for (int dz = 0; dz < k; ++dz)
                for (int dy = 0; dy < k; ++dy)
                    for (int dx = 0; dx < k; ++dx) {
                        double acc = 0.0;
                        for (int z = 0; z < od; ++z) {
                            int zi = z * s + dz - p;
                            if (zi < 0 || zi >= x.d) continue;
                            for (int y = 0; y < oh; ++y) {
                                int yi = y * s + dy - p;
                                if (yi < 0 || yi >= x.h) continue;
                                const double* grow = g + z * oplane + static_cast<size_t>(y) * ow;
                                const double* irow =
                                    ic_data + (static_cast<size_t>(zi) * x.h + yi) * x.w;
                                int x0 = 0, x1 = ow;
                                while (x0 < ow && x0 * s + dx - p < 0) ++x0;
                                while (x1 > x0 && (x1 - 1) * s + dx - p >= x.w) --x1;
                                const int off = dx - p;
                                if (s == 1) {
                                    for (int xx = x0; xx < x1; ++xx)
                                        acc += grow[xx] * irow[xx + off];
                                } else {
                                    for (int xx = x0; xx < x1; ++xx)
                                        acc += grow[xx] * irow[xx * s + off];
                                }
                            }
                        }
                        wg[(dz * k + dy) * k + dx] += acc;
                    }
        }
    }

    // input grads: dX[ic, xi] += sum_oc,d w[oc,ic,d] * g[oc, (xi + p - d)/s]
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < in_ch_; ++ic) {
        double* gi = grad_in.channel(ic);
        for (int oc = 0; oc < out_ch_; ++oc) {
            const double* g = grad_out.channel(oc);
            const double* wk = wgt + (static_cast<size_t>(oc) * in_ch_ + ic) * ksize;
            for (int dz = 0; dz < k; ++dz)
                for (int dy = 0; dy < k; ++dy)
                    for (int dx = 0; dx < k; ++dx) {
                        const double wv = wk[(dz * k + dy) * k + dx];
                        if (wv == 0.0) continue;
                        for (int z = 0; z < od; ++z) {
                            int zi = z * s + dz - p;
                            if (zi < 0 || zi >= x.d) continue;
                            for (int y = 0; y < oh; ++y) {
                                int yi = y * s + dy - p;
                                if (yi < 0 || yi >= x.h) continue;
                                const double* grow = g + z * oplane + static_cast<size_t>(y) * ow;
                                double* irow = gi + (static_cast<size_t>(zi) * x.h + yi) * x.w;
                                int x0 = 0, x1 = ow;
                                while (x0 < ow && x0 * s + dx - p < 0) ++x0;
                                while (x1 > x0 && (x1 - 1) * s + dx - p >= x.w) --x1;
                                const int off = dx - p;
                                if (s == 1) {
                                    for (int xx = x0; xx < x1; ++xx)
                                        irow[xx + off] += wv * grow[xx];
                                } else {
                                    for (int xx = x0; xx < x1; ++xx)
                                        irow[xx * s + off] += wv * grow[xx];
                                }
                            }
                        }
                    }
        }
    }
    return grad_in;
}

Linear::Linear(ParameterStore& store, const std::string& name, int in_dim, int out_dim, Rng& rng,
               bool zero_init)
    : store_(&store), in_dim_(in_dim), out_dim_(out_dim) {
    weight_ = store.add(name + ".weight", {out_dim, in_dim});
    bias_ = store.add(name + ".bias", {out_dim});
    if (!zero_init) {
        fan_in_init(store[weight_].value, in_dim, rng);
        fan_in_init(store[bias_].value, in_dim, rng);
    }
}

std::vector<double> Linear::forward(const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != in_dim_) throw ValidationError("Linear: size mismatch");
    cached_input_ = x;
    const auto& wp = store_->operator[](weight_);
    const auto& bp = store_->operator[](bias_);
    std::vector<double> out(out_dim_);
    for (int o = 0; o < out_dim_; ++o) {
        double acc = bp.value[o];
        const double* row = wp.value.data() + static_cast<size_t>(o) * in_dim_;
        for (int i = 0; i < in_dim_; ++i) acc += row[i] * x[i];
        out[o] = acc;
    }
    return out;
}

std::vector<double> Linear::backward(const std::vector<double>& grad_out) {
    auto& wp = store_->operator[](weight_);
    auto& bp = store_->operator[](bias_);
    std::vector<double> grad_in(in_dim_, 0.0);
    for (int o = 0; o < out_dim_; ++o) {
        double g = grad_out[o];
        bp.grad[o] += g;
        double* wrow = wp.grad.data() + static_cast<size_t>(o) * in_dim_;
        const double* vrow = wp.value.data() + static_cast<size_t>(o) * in_dim_;
        for (int i = 0; i < in_dim_; ++i) {
            wrow[i] += g * cached_input_[i];
            grad_in[i] += g * vrow[i];
        }
    }
    return grad_in;
}

GroupNorm::GroupNorm(ParameterStore& store, const std::string& name, int channels, int groups)
    : store_(&store), channels_(channels), groups_(groups) {
    if (channels % groups != 0) throw ValidationError("GroupNorm: channels % groups != 0");
    gamma_ = store.add(name + ".gamma", {channels});
    beta_ = store.add(name + ".beta", {channels});
    auto& g = store[gamma_];
    std::fill(g.value.begin(), g.value.end(), 1.0);
}

Tensor GroupNorm::forward(const Tensor& x) {
    if (x.c != channels_) throw ValidationError("GroupNorm: channel mismatch");
    const auto& gp = store_->operator[](gamma_);
    const auto& bp = store_->operator[](beta_);
    const int cg = channels_ / groups_;
    const size_t sp = x.spatial();
    const double eps = 1e-5;

    Tensor out(x.c, x.d, x.h, x.w);
    cached_norm_ = Tensor(x.c, x.d, x.h, x.w);
    cached_inv_std_.assign(groups_, 0.0);

    for (int g = 0; g < groups_; ++g) {
        const size_t n = static_cast<size_t>(cg) * sp;
        const double* xs = x.channel(g * cg);
        double mean = 0.0;
        for (size_t i = 0; i < n; ++i) mean += xs[i];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double dlt = xs[i] - mean;
            var += dlt * dlt;
        }
        var /= static_cast<double>(n);
        double inv_std = 1.0 / std::sqrt(var + eps);
        cached_inv_std_[g] = inv_std;

        double* ns = cached_norm_.channel(g * cg);
        double* os = out.channel(g * cg);
        for (int c = 0; c < cg; ++c) {
            double gamma = gp.value[g * cg + c];
            double beta = bp.value[g * cg + c];
            for (size_t i = 0; i < sp; ++i) {
                double nv = (xs[c * sp + i] - mean) * inv_std;
                ns[c * sp + i] = nv;
                os[c * sp + i] = gamma * nv + beta;
            }
        }
    }
    return out;
}

Tensor GroupNorm::backward(const Tensor& grad_out) {
    auto& gp = store_->operator[](gamma_);
    auto& bp = store_->operator[](beta_);
    const int cg = channels_ / groups_;
    const size_t sp = grad_out.spatial();

    Tensor grad_in(grad_out.c, grad_out.d, grad_out.h, grad_out.w);
    for (int g = 0; g < groups_; ++g) {
        const size_t n = static_cast<size_t>(cg) * sp;
        const double inv_std = cached_inv_std_[g];
        const double* ns = cached_norm_.channel(g * cg);
        const double* gs = grad_out.channel(g * cg);

        // param grads and the two reduction terms of the norm backward
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int c = 0; c < cg; ++c) {
            double gamma = gp.value[g * cg + c];
            double dg = 0.0, db = 0.0;
            for (size_t i = 0; i < sp; ++i) {
                double go = gs[c * sp + i];
                double xh = ns[c * sp + i];
                dg += go * xh;
                db += go;
                double dxh = go * gamma;
                sum_dxhat += dxh;
                sum_dxhat_xhat += dxh * xh;
            }
            gp.grad[g * cg + c] += dg;
            bp.grad[g * cg + c] += db;
        }

        double* gi = grad_in.channel(g * cg);
        const double inv_n = 1.0 / static_cast<double>(n);
        for (int c = 0; c < cg; ++c) {
            double gamma = gp.value[g * cg + c];
            for (size_t i = 0; i < sp; ++i) {
                double dxh = gs[c * sp + i] * gamma;
                double xh = ns[c * sp + i];
                gi[c * sp + i] =
                    inv_std * (dxh - inv_n * sum_dxhat - xh * inv_n * sum_dxhat_xhat);
            }
        }
    }
    return grad_in;
}

Tensor Silu::forward(const Tensor& x) {
    cached_input_ = x;
    Tensor out(x.c, x.d, x.h, x.w);
    for (size_t i = 0; i < x.data.size(); ++i) out.data[i] = silu(x.data[i]);
    return out;
}

Tensor Silu::backward(const Tensor& grad_out) {
    Tensor grad_in(grad_out.c, grad_out.d, grad_out.h, grad_out.w);
    for (size_t i = 0; i < grad_out.data.size(); ++i)
        grad_in.data[i] = grad_out.data[i] * silu_grad(cached_input_.data[i]);
    return grad_in;
}

AttentionBlock::AttentionBlock(ParameterStore& store, const std::string& name, int channels,
                               Rng& rng)
    : channels_(channels) {
    int groups = std::min(8, channels);
    while (channels % groups != 0) --groups;
    norm_ = GroupNorm(store, name + ".norm", channels, groups);
    qkv_ = Conv3d(store, name + ".qkv", channels, 3 * channels, 1, 1, rng);
    proj_ = Conv3d(store, name + ".proj", channels, channels, 1, 1, rng, /*zero_init=*/true);
}

Tensor AttentionBlock::forward(const Tensor& x) {
    Tensor h = norm_.forward(x);
    Tensor qkv = qkv_.forward(h);

    const int C = channels_;
    const size_t S = x.spatial();
    cached_q_ = Tensor(C, x.d, x.h, x.w);
    cached_k_ = Tensor(C, x.d, x.h, x.w);
    cached_v_ = Tensor(C, x.d, x.h, x.w);
    std::copy_n(qkv.data.begin(), C * S, cached_q_.data.begin());
    std::copy_n(qkv.data.begin() + C * S, C * S, cached_k_.data.begin());
    std::copy_n(qkv.data.begin() + 2 * C * S, C * S, cached_v_.data.begin());

    const double scale = 1.0 / std::sqrt(static_cast<double>(C));
    cached_att_.assign(S * S, 0.0);
    Tensor o(C, x.d, x.h, x.w);

#pragma omp parallel for schedule(static)
    for (size_t s = 0; s < S; ++s) {
        double* row = cached_att_.data() + s * S;
        double maxv = -1e300;
        for (size_t s2 = 0; s2 < S; ++s2) {
            double acc = 0.0;
            for (int c = 0; c < C; ++c)
                acc += cached_q_.data[c * S + s] * cached_k_.data[c * S + s2];
            row[s2] = acc * scale;
            maxv = std::max(maxv, row[s2]);
        }
        double denom = 0.0;
        for (size_t s2 = 0; s2 < S; ++s2) {
            row[s2] = std::exp(row[s2] - maxv);
            denom += row[s2];
        }
        for (size_t s2 = 0; s2 < S; ++s2) row[s2] /= denom;
        for (int c = 0; c < C; ++c) {
            double acc = 0.0;
            for (size_t s2 = 0; s2 < S; ++s2) acc += row[s2] * cached_v_.data[c * S + s2];
            o.data[c * S + s] = acc;
        }
    }

    Tensor out = proj_.forward(o);
    out += x;
    return out;
}

Tensor AttentionBlock::backward(const Tensor& grad_out) {
    Tensor grad_o = proj_.backward(grad_out);

    const int C = channels_;
    const size_t S = grad_out.spatial();
    const double scale = 1.0 / std::sqrt(static_cast<double>(C));

    Tensor grad_q(C, grad_out.d, grad_out.h, grad_out.w);
    Tensor grad_k(C, grad_out.d, grad_out.h, grad_out.w);
    Tensor grad_v(C, grad_out.d, grad_out.h, grad_out.w);

    std::vector<double> grad_att(S * S, 0.0);
#pragma omp parallel for schedule(static)
    for (size_t s = 0; s < S; ++s) {
        // dV and dAtt
        double* garow = grad_att.data() + s * S;
        const double* arow = cached_att_.data() + s * S;
        for (size_t s2 = 0; s2 < S; ++s2) {
            double acc = 0.0;
            for (int c = 0; c < C; ++c) acc += grad_o.data[c * S + s] * cached_v_.data[c * S + s2];
            garow[s2] = acc;
        }
        // softmax backward per row
        double dotp = 0.0;
        for (size_t s2 = 0; s2 < S; ++s2) dotp += garow[s2] * arow[s2];
        for (size_t s2 = 0; s2 < S; ++s2) garow[s2] = arow[s2] * (garow[s2] - dotp);
    }

    // accumulate grad_v, grad_q, grad_k (serial over s to avoid races)
    for (size_t s = 0; s < S; ++s) {
        const double* arow = cached_att_.data() + s * S;
        const double* garow = grad_att.data() + s * S;
        for (int c = 0; c < C; ++c) {
            double go = grad_o.data[c * S + s];
            double qv = cached_q_.data[c * S + s];
            double gq = 0.0;
            for (size_t s2 = 0; s2 < S; ++s2) {
                grad_v.data[c * S + s2] += arow[s2] * go;
                gq += garow[s2] * cached_k_.data[c * S + s2];
                grad_k.data[c * S + s2] += garow[s2] * qv * scale;
            }
            grad_q.data[c * S + s] = gq * scale;
        }
    }

    Tensor grad_qkv(3 * C, grad_out.d, grad_out.h, grad_out.w);
    std::copy(grad_q.data.begin(), grad_q.data.end(), grad_qkv.data.begin());
    std::copy(grad_k.data.begin(), grad_k.data.end(), grad_qkv.data.begin() + C * S);
    std::copy(grad_v.data.begin(), grad_v.data.end(), grad_qkv.data.begin() + 2 * C * S);

    Tensor grad_h = qkv_.backward(grad_qkv);
    Tensor grad_in = norm_.backward(grad_h);
    grad_in += grad_out;  // residual
    return grad_in;
}

Upsample::Upsample(ParameterStore& store, const std::string& name, int channels, Rng& rng) {
    conv_ = Conv3d(store, name + ".conv", channels, channels, 3, 1, rng);
}

Tensor Upsample::forward(const Tensor& x) {
    in_d_ = x.d;
    in_h_ = x.h;
    in_w_ = x.w;
    Tensor up(x.c, x.d * 2, x.h * 2, x.w * 2);
    for (int c = 0; c < x.c; ++c) {
        const double* src = x.channel(c);
        double* dst = up.channel(c);
        for (int z = 0; z < up.d; ++z)
            for (int y = 0; y < up.h; ++y)
                for (int xx = 0; xx < up.w; ++xx)
                    dst[(static_cast<size_t>(z) * up.h + y) * up.w + xx] =
                        src[(static_cast<size_t>(z / 2) * x.h + y / 2) * x.w + xx / 2];
    }
    return conv_.forward(up);
}

Tensor Upsample::backward(const Tensor& grad_out) {
    Tensor grad_up = conv_.backward(grad_out);
    Tensor grad_in(grad_up.c, in_d_, in_h_, in_w_);
    for (int c = 0; c < grad_up.c; ++c) {
        const double* src = grad_up.channel(c);
        double* dst = grad_in.channel(c);
        for (int z = 0; z < grad_up.d; ++z)
            for (int y = 0; y < grad_up.h; ++y)
                for (int xx = 0; xx < grad_up.w; ++xx)
                    dst[(static_cast<size_t>(z / 2) * in_h_ + y / 2) * in_w_ + xx / 2] +=
                        src[(static_cast<size_t>(z) * grad_up.h + y) * grad_up.w + xx];
    }
    return grad_in;
}

ResBlock::ResBlock(ParameterStore& store, const std::string& name, int in_ch, int out_ch,
                   int emb_dim, int groups, Rng& rng)
    : out_ch_(out_ch) {
    int g1 = std::min(groups, in_ch);
    while (in_ch % g1 != 0) --g1;
    int g2 = std::min(groups, out_ch);
    while (out_ch % g2 != 0) --g2;
    gn1_ = GroupNorm(store, name + ".gn1", in_ch, g1);
    conv1_ = Conv3d(store, name + ".conv1", in_ch, out_ch, 3, 1, rng);
    emb_proj_ = Linear(store, name + ".emb", emb_dim, out_ch, rng);
    gn2_ = GroupNorm(store, name + ".gn2", out_ch, g2);
    conv2_ = Conv3d(store, name + ".conv2", out_ch, out_ch, 3, 1, rng, /*zero_init=*/true);
    has_skip_conv_ = in_ch != out_ch;
    if (has_skip_conv_) skip_ = Conv3d(store, name + ".skip", in_ch, out_ch, 1, 1, rng);
}

Tensor ResBlock::forward(const Tensor& x, const std::vector<double>& emb) {
    cached_input_ = x;
    Tensor h = conv1_.forward(act1_.forward(gn1_.forward(x)));

    emb_act_in_ = emb;
    std::vector<double> emb_s(emb.size());
    for (size_t i = 0; i < emb.size(); ++i) emb_s[i] = silu(emb[i]);
    std::vector<double> shift = emb_proj_.forward(emb_s);
    for (int c = 0; c < out_ch_; ++c) {
        double* ch = h.channel(c);
        for (size_t i = 0; i < h.spatial(); ++i) ch[i] += shift[c];
    }

    Tensor out = conv2_.forward(act2_.forward(gn2_.forward(h)));
    if (has_skip_conv_) out += skip_.forward(x);
    else out += x;
    return out;
}

Tensor ResBlock::backward(const Tensor& grad_out, std::vector<double>& grad_emb) {
    Tensor grad_h = gn2_.backward(act2_.backward(conv2_.backward(grad_out)));

    // time-embedding shift: per-channel sum
    std::vector<double> grad_shift(out_ch_, 0.0);
    for (int c = 0; c < out_ch_; ++c) {
        const double* ch = grad_h.channel(c);
        double acc = 0.0;
        for (size_t i = 0; i < grad_h.spatial(); ++i) acc += ch[i];
        grad_shift[c] = acc;
    }
    std::vector<double> grad_emb_s = emb_proj_.backward(grad_shift);
    for (size_t i = 0; i < grad_emb.size(); ++i)
        grad_emb[i] += grad_emb_s[i] * silu_grad(emb_act_in_[i]);

    Tensor grad_x = gn1_.backward(act1_.backward(conv1_.backward(grad_h)));
    if (has_skip_conv_) grad_x += skip_.backward(grad_out);
    else grad_x += grad_out;
    return grad_x;
}

std::vector<double> timestep_embedding(int t, int dim) {
    std::vector<double> emb(dim, 0.0);
    int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * i / std::max(1, half - 1));
        emb[i] = std::sin(t * freq);
        emb[half + i] = std::cos(t * freq);
    }
    return emb;
}

}  // namespace crownfill

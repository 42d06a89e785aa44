#include "crownfill/diffusion.hpp"

#include <cmath>

#include "crownfill/error.hpp"

namespace crownfill {

void GuidanceConfig::validate() const {
    if (!(w >= 0.0)) throw ValidationError("GuidanceConfig: w must be >= 0");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0))
        throw ValidationError("GuidanceConfig: dropout_p must be in [0, 1)");
}

std::vector<double> q_sample(std::span<const double> x0, int t,
                             std::span<const double> eps, const NoiseSchedule& schedule) {
    if (t < 1 || t > schedule.T) throw ValidationError("q_sample: t out of range");
    if (x0.size() != eps.size()) throw ValidationError("q_sample: shape mismatch");
    double ab = schedule.alpha_bar(t);
    double c0 = std::sqrt(ab), c1 = std::sqrt(1.0 - ab);
    std::vector<double> out(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) out[i] = c0 * x0[i] + c1 * eps[i];
    return out;
}

std::vector<double> cfg_mix(std::span<const double> eps_uncond,
                            std::span<const double> eps_cond, double w) {
    if (eps_uncond.size() != eps_cond.size()) throw ValidationError("cfg_mix: shape mismatch");
    if (w == 1.0) return {eps_cond.begin(), eps_cond.end()};  // exact interpolation endpoint
    std::vector<double> out(eps_uncond.size());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = eps_uncond[i] + w * (eps_cond[i] - eps_uncond[i]);
    return out;
}

std::vector<double> p_sample_step(std::span<const double> predicted_eps,
                                  std::span<const double> x_t, int t,
                                  const NoiseSchedule& schedule, Rng& rng) {
    if (t < 1 || t > schedule.T) throw ValidationError("p_sample_step: t out of range");
    if (predicted_eps.size() != x_t.size())
        throw ValidationError("p_sample_step: shape mismatch");

    double beta = schedule.beta(t);
    double alpha = schedule.alpha(t);
    double bar = schedule.alpha_bar(t);
    double bar_prev = schedule.alpha_bar_prev(t);
    double mean_scale = 1.0 / std::sqrt(alpha);
    double eps_scale = beta / std::sqrt(1.0 - bar);
    double sigma = t > 1 ? std::sqrt((1.0 - bar_prev) / (1.0 - bar) * beta) : 0.0;

    std::vector<double> out(x_t.size());
    for (size_t i = 0; i < out.size(); ++i) {
        double z = t > 1 ? rng.normal() : 0.0;
        out[i] = mean_scale * (x_t[i] - eps_scale * predicted_eps[i]) + sigma * z;
    }
    return out;
}

SecondMomentResampler::SecondMomentResampler(int T, int history)
    : T_(T), history_(history), sq_losses_(T), cursor_(T, 0), filled_(T, 0) {
    if (T < 1) throw ValidationError("SecondMomentResampler: T must be >= 1");
    if (history < 1) throw ValidationError("SecondMomentResampler: history must be >= 1");
    for (auto& buf : sq_losses_) buf.assign(history, 0.0);
}

bool SecondMomentResampler::warmed_up() const {
    for (int t = 0; t < T_; ++t)
        if (filled_[t] < history_) return false;
    return true;
}

std::vector<double> SecondMomentResampler::probabilities() const {
    std::vector<double> p(T_, 1.0 / T_);
    if (!warmed_up()) return p;
    double total = 0.0;
    for (int t = 0; t < T_; ++t) {
        double mean_sq = 0.0;
        for (double v : sq_losses_[t]) mean_sq += v;
        mean_sq /= history_;
        p[t] = std::sqrt(mean_sq);
        total += p[t];
    }
    const double uniform_floor = 0.001;
    for (int t = 0; t < T_; ++t) {
        double base = total > 0.0 ? p[t] / total : 1.0 / T_;
        p[t] = (1.0 - uniform_floor) * base + uniform_floor / T_;
    }
    return p;
}

SecondMomentResampler::Draw SecondMomentResampler::sample(Rng& rng) const {
    if (!warmed_up()) {
        Draw d;
        d.t = static_cast<int>(rng.uniform_int(1, T_));
        d.weight = 1.0;
        return d;
    }
    std::vector<double> p = probabilities();
    double r = rng.uniform();
    double acc = 0.0;
    int t = T_;
    for (int i = 0; i < T_; ++i) {
        acc += p[i];
        if (r < acc) {
            t = i + 1;
            break;
        }
    }
    Draw d;
    d.t = t;
    d.weight = 1.0 / (T_ * p[t - 1]);
    return d;
}

void SecondMomentResampler::update(int t, double loss) {
    if (t < 1 || t > T_) throw ValidationError("SecondMomentResampler: t out of range");
    auto& buf = sq_losses_[t - 1];
    buf[cursor_[t - 1]] = loss * loss;
    cursor_[t - 1] = (cursor_[t - 1] + 1) % history_;
    if (filled_[t - 1] < history_) ++filled_[t - 1];
}

}  // namespace crownfill

#include "crownfill/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "crownfill/error.hpp"

namespace crownfill {

void NoiseSchedule::validate() const {
    if (T < 1 || static_cast<int>(betas.size()) != T)
        throw ValidationError("NoiseSchedule: table size does not match T");
    for (int i = 0; i < T; ++i) {
        if (!(betas[i] > 0.0 && betas[i] < 1.0))
            throw ValidationError("NoiseSchedule: beta out of (0,1) at t=" + std::to_string(i + 1));
        if (i > 0 && !(alpha_bars[i] < alpha_bars[i - 1]))
            throw ValidationError("NoiseSchedule: alpha_bar not strictly decreasing");
    }
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
    NoiseSchedule s;
    s.T = static_cast<int>(betas.size());
    s.betas = std::move(betas);
    s.alphas.resize(s.T);
    s.alpha_bars.resize(s.T);
    double prod = 1.0;
    for (int i = 0; i < s.T; ++i) {
        s.alphas[i] = 1.0 - s.betas[i];
        prod *= s.alphas[i];
        s.alpha_bars[i] = prod;
    }
    s.validate();
    return s;
}

NoiseSchedule linear_schedule(int T) {
    if (T < 1) throw ValidationError("linear_schedule: T must be >= 1");
    double scale = 1000.0 / T;
    double lo = std::min(1e-4 * scale, 0.999);
    double hi = std::min(0.02 * scale, 0.999);
    std::vector<double> betas(T);
    for (int i = 0; i < T; ++i)
        betas[i] = T == 1 ? lo : lo + (hi - lo) * i / (T - 1);
    return NoiseSchedule::from_betas(std::move(betas));
}

RespacedSchedule respace(const NoiseSchedule& schedule, int target_steps) {
    if (target_steps < 1 || target_steps > schedule.T)
        throw ValidationError("respace: target_steps out of range");

    RespacedSchedule out;
    out.kept_indices.resize(target_steps);
    for (int j = 0; j < target_steps; ++j)
        out.kept_indices[j] = static_cast<int>(
            (static_cast<long long>(j + 1) * schedule.T) / target_steps);

    out.chain.T = target_steps;
    out.chain.betas.resize(target_steps);
    out.chain.alphas.resize(target_steps);
    out.chain.alpha_bars.resize(target_steps);
    double prev_bar = 1.0;
    for (int j = 0; j < target_steps; ++j) {
        double bar = schedule.alpha_bar(out.kept_indices[j]);
        out.chain.alpha_bars[j] = bar;  // exact copy of the base value
        out.chain.alphas[j] = bar / prev_bar;
        out.chain.betas[j] = 1.0 - out.chain.alphas[j];
        prev_bar = bar;
    }
    out.chain.validate();
    return out;
}

}  // namespace crownfill

#pragma once

#include <cstddef>
#include <vector>

namespace crownfill {

// Dense channels-first volume (C, D, H, W), double precision.
struct Tensor {
    int c = 0, d = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int c_, int d_, int h_, int w_) : c(c_), d(d_), h(h_), w(w_) {
        data.assign(static_cast<size_t>(c_) * d_ * h_ * w_, 0.0);
    }

    size_t size() const { return data.size(); }
    size_t spatial() const { return static_cast<size_t>(d) * h * w; }
    bool same_shape(const Tensor& o) const {
        return c == o.c && d == o.d && h == o.h && w == o.w;
    }

    double* channel(int ci) { return data.data() + static_cast<size_t>(ci) * spatial(); }
    const double* channel(int ci) const { return data.data() + static_cast<size_t>(ci) * spatial(); }

    void zero() { std::fill(data.begin(), data.end(), 0.0); }

    Tensor& operator+=(const Tensor& o) {
        for (size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
        return *this;
    }
};

// Channelwise concatenation [a, b].
Tensor concat_channels(const Tensor& a, const Tensor& b);
// Splits grad of concat_channels back into the two parts.
void split_channels(const Tensor& grad, int c_first, Tensor& grad_a, Tensor& grad_b);

}  // namespace crownfill

#include "crownfill/noise.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "crownfill/error.hpp"

namespace crownfill {

void SimplexNoiseParams::validate() const {
    if (!(amplitude >= 0.0)) throw ValidationError("SimplexNoiseParams: amplitude must be >= 0");
    if (!(frequency > 0.0)) throw ValidationError("SimplexNoiseParams: frequency must be > 0");
}

namespace {

// 12 edge-midpoint gradients of a cube (Gustavson's grad3 table).
constexpr int kGrad3[12][3] = {{1, 1, 0},  {-1, 1, 0},  {1, -1, 0}, {-1, -1, 0},
                               {1, 0, 1},  {-1, 0, 1},  {1, 0, -1}, {-1, 0, -1},
                               {0, 1, 1},  {0, -1, 1},  {0, 1, -1}, {0, -1, -1}};

constexpr double kSkew3 = 1.0 / 3.0;
constexpr double kUnskew3 = 1.0 / 6.0;

inline int fast_floor(double x) {
    int xi = static_cast<int>(x);
    return x < xi ? xi - 1 : xi;
}

inline double grad_dot(int gi, double x, double y, double z) {
    return kGrad3[gi][0] * x + kGrad3[gi][1] * y + kGrad3[gi][2] * z;
}

}  // namespace

SimplexNoise::SimplexNoise(uint64_t seed) {
    std::array<uint8_t, 256> table;
    std::iota(table.begin(), table.end(), 0);
    std::mt19937_64 gen(seed);
    for (int i = 255; i > 0; --i) {
        int j = static_cast<int>(gen() % static_cast<uint64_t>(i + 1));
        std::swap(table[i], table[j]);
    }
    for (int i = 0; i < 512; ++i) perm_[i] = table[i & 255];
}

double SimplexNoise::eval(const Vec3& p) const {
    double x = p.x, y = p.y, z = p.z;

    double s = (x + y + z) * kSkew3;
    int i = fast_floor(x + s), j = fast_floor(y + s), k = fast_floor(z + s);
    double t = (i + j + k) * kUnskew3;
    double x0 = x - (i - t), y0 = y - (j - t), z0 = z - (k - t);

    // Rank the simplex corner order inside the skewed cell.
    int i1, j1, k1, i2, j2, k2;
    if (x0 >= y0) {
        if (y0 >= z0) { i1 = 1; j1 = 0; k1 = 0; i2 = 1; j2 = 1; k2 = 0; }
        else if (x0 >= z0) { i1 = 1; j1 = 0; k1 = 0; i2 = 1; j2 = 0; k2 = 1; }
        else { i1 = 0; j1 = 0; k1 = 1; i2 = 1; j2 = 0; k2 = 1; }
    } else {
        if (y0 < z0) { i1 = 0; j1 = 0; k1 = 1; i2 = 0; j2 = 1; k2 = 1; }
        else if (x0 < z0) { i1 = 0; j1 = 1; k1 = 0; i2 = 0; j2 = 1; k2 = 1; }
        else { i1 = 0; j1 = 1; k1 = 0; i2 = 1; j2 = 1; k2 = 0; }
    }

    double x1 = x0 - i1 + kUnskew3, y1 = y0 - j1 + kUnskew3, z1 = z0 - k1 + kUnskew3;
    double x2 = x0 - i2 + 2.0 * kUnskew3, y2 = y0 - j2 + 2.0 * kUnskew3, z2 = z0 - k2 + 2.0 * kUnskew3;
    double x3 = x0 - 1.0 + 3.0 * kUnskew3, y3 = y0 - 1.0 + 3.0 * kUnskew3, z3 = z0 - 1.0 + 3.0 * kUnskew3;

    int ii = i & 255, jj = j & 255, kk = k & 255;
    int gi0 = perm_[ii + perm_[jj + perm_[kk]]] % 12;
    int gi1 = perm_[ii + i1 + perm_[jj + j1 + perm_[kk + k1]]] % 12;
    int gi2 = perm_[ii + i2 + perm_[jj + j2 + perm_[kk + k2]]] % 12;
    int gi3 = perm_[ii + 1 + perm_[jj + 1 + perm_[kk + 1]]] % 12;

    double n = 0.0;
    double t0 = 0.6 - x0 * x0 - y0 * y0 - z0 * z0;
    if (t0 > 0.0) { t0 *= t0; n += t0 * t0 * grad_dot(gi0, x0, y0, z0); }
    double t1 = 0.6 - x1 * x1 - y1 * y1 - z1 * z1;
    if (t1 > 0.0) { t1 *= t1; n += t1 * t1 * grad_dot(gi1, x1, y1, z1); }
    double t2 = 0.6 - x2 * x2 - y2 * y2 - z2 * z2;
    if (t2 > 0.0) { t2 *= t2; n += t2 * t2 * grad_dot(gi2, x2, y2, z2); }
    double t3 = 0.6 - x3 * x3 - y3 * y3 - z3 * z3;
    if (t3 > 0.0) { t3 *= t3; n += t3 * t3 * grad_dot(gi3, x3, y3, z3); }

    // 32 scales the raw sum to roughly [-1, 1]; clamp makes the bound hard.
    return clamp(32.0 * n, -1.0, 1.0);
}

SdfGrid perturb_with_simplex(const SdfGrid& grid, const SimplexNoiseParams& params) {
    params.validate();
    SimplexNoise noise(params.seed);
    SdfGrid out = grid;
    const int n = grid.resolution();
    const double inv = 1.0 / n;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                Vec3 v{(i + 0.5) * inv, (j + 0.5) * inv, (k + 0.5) * inv};
                double d = static_cast<double>(grid.at(i, j, k)) +
                           params.amplitude * noise.eval(v * params.frequency);
                out.at(i, j, k) = static_cast<float>(
                    clamp(d, -static_cast<double>(kTruncation), static_cast<double>(kTruncation)));
            }
    return out;
}

}  // namespace crownfill

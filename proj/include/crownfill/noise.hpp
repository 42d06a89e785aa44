#pragma once

#include <array>
#include <cstdint>

#include "crownfill/math.hpp"
#include "crownfill/sdf_grid.hpp"

namespace crownfill {

struct SimplexNoiseParams {
    double amplitude = 0.06;
    double frequency = 2.8;
    uint64_t seed = 0;

    void validate() const;
};

// Classic 3D simplex noise with a seeded permutation table.
// Output is deterministic for a fixed seed and clamped to [-1, 1].
class SimplexNoise {
public:
    explicit SimplexNoise(uint64_t seed);
    double eval(const Vec3& p) const;

private:
    std::array<uint8_t, 512> perm_;
};

inline double simplex_noise(const Vec3& point, uint64_t seed) {
    return SimplexNoise(seed).eval(point);
}

// out[v] = clamp(in[v] + amplitude * s(frequency * v), +-kTruncation) where v is
// the voxel center in normalized [0,1]^3 grid coordinates.
SdfGrid perturb_with_simplex(const SdfGrid& grid, const SimplexNoiseParams& params);

}  // namespace crownfill

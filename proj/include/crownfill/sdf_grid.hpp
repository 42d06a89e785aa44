#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "crownfill/math.hpp"

namespace crownfill {

// Clamp bound for stored signed distances, in normalized shape units.
inline constexpr float kTruncation = 0.25f;

// Dense cubic voxel grid of truncated signed distances, negative inside.
// Values are stored x-fastest: index = i + n*(j + n*k).
class SdfGrid {
public:
    SdfGrid() = default;
    SdfGrid(int resolution, const Vec3& origin, double spacing);
    SdfGrid(int resolution, const Vec3& origin, double spacing, float fill);

    int resolution() const { return res_; }
    const Vec3& origin() const { return origin_; }
    double spacing() const { return spacing_; }
    size_t voxel_count() const { return values_.size(); }

    const std::vector<float>& values() const { return values_; }
    std::vector<float>& values() { return values_; }

    float at(int i, int j, int k) const {
        return values_[static_cast<size_t>(i) + static_cast<size_t>(res_) * (static_cast<size_t>(j) + static_cast<size_t>(res_) * static_cast<size_t>(k))];
    }
    float& at(int i, int j, int k) {
        return values_[static_cast<size_t>(i) + static_cast<size_t>(res_) * (static_cast<size_t>(j) + static_cast<size_t>(res_) * static_cast<size_t>(k))];
    }

    // World position of the voxel sample point (i, j, k).
    Vec3 voxel_center(int i, int j, int k) const {
        return origin_ + Vec3{static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)} * spacing_;
    }

    bool same_spec(const SdfGrid& o) const;

    // True when every voxel is >= 0 (no interior).
    bool empty_occupancy() const;

private:
    int res_ = 0;
    Vec3 origin_{};
    double spacing_ = 0.0;
    std::vector<float> values_;
};

// values[i,j,k] = clamp(field(center_ijk), -kTruncation, +kTruncation).
// Throws NumericError naming the voxel if the field returns a non-finite value.
SdfGrid sample_to_grid(const std::function<double(const Vec3&)>& field, int resolution,
                       const Vec3& origin, double spacing);

// Binary ".sdfg" format:
//   magic "SDFG" | version u32 LE | resolution u32 LE | origin 3 x f64 LE |
//   spacing f64 LE | resolution^3 f32 LE values, x-fastest.
void save_sdfg(const SdfGrid& grid, const std::string& path);
SdfGrid load_sdfg(const std::string& path);

}  // namespace crownfill

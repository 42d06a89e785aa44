#include "crownfill/sdf_grid.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "crownfill/error.hpp"

namespace crownfill {

SdfGrid::SdfGrid(int resolution, const Vec3& origin, double spacing)
    : SdfGrid(resolution, origin, spacing, kTruncation) {}

SdfGrid::SdfGrid(int resolution, const Vec3& origin, double spacing, float fill)
    : res_(resolution), origin_(origin), spacing_(spacing) {
    if (resolution < 2) throw ValidationError("SdfGrid: resolution must be >= 2");
    if (!(spacing > 0.0)) throw ValidationError("SdfGrid: spacing must be > 0");
    values_.assign(static_cast<size_t>(res_) * res_ * res_, fill);
}

bool SdfGrid::same_spec(const SdfGrid& o) const {
    return res_ == o.res_ && spacing_ == o.spacing_ && origin_.x == o.origin_.x &&
           origin_.y == o.origin_.y && origin_.z == o.origin_.z;
}

bool SdfGrid::empty_occupancy() const {
    for (float v : values_)
        if (v < 0.0f) return false;
    return true;
}

SdfGrid sample_to_grid(const std::function<double(const Vec3&)>& field, int resolution,
                       const Vec3& origin, double spacing) {
    SdfGrid grid(resolution, origin, spacing);
    const int n = resolution;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                double v = field(grid.voxel_center(i, j, k));
                if (!std::isfinite(v))
                    throw NumericError("sample_to_grid: non-finite field value at voxel (" +
                                       std::to_string(i) + ", " + std::to_string(j) + ", " +
                                       std::to_string(k) + ")");
                grid.at(i, j, k) = static_cast<float>(
                    clamp(v, -static_cast<double>(kTruncation), static_cast<double>(kTruncation)));
            }
    return grid;
}

namespace {

constexpr uint32_t kSdfgVersion = 1;

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

void put_u64(std::ostream& os, uint64_t v) {
    put_u32(os, static_cast<uint32_t>(v));
    put_u32(os, static_cast<uint32_t>(v >> 32));
}

uint64_t get_u64(std::istream& is) {
    uint64_t lo = get_u32(is);
    uint64_t hi = get_u32(is);
    return lo | (hi << 32);
}

void put_f64(std::ostream& os, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

double get_f64(std::istream& is) {
    uint64_t bits = get_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_f32(std::ostream& os, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

float get_f32(std::istream& is) {
    uint32_t bits = get_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

void save_sdfg(const SdfGrid& grid, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("save_sdfg: cannot open " + path);
    os.write("SDFG", 4);
    put_u32(os, kSdfgVersion);
    put_u32(os, static_cast<uint32_t>(grid.resolution()));
    put_f64(os, grid.origin().x);
    put_f64(os, grid.origin().y);
    put_f64(os, grid.origin().z);
    put_f64(os, grid.spacing());
    for (float v : grid.values()) put_f32(os, v);
    if (!os) throw IoError("save_sdfg: write failed for " + path);
}

SdfGrid load_sdfg(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_sdfg: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SDFG", 4) != 0)
        throw ValidationError("load_sdfg: bad magic in " + path);
    uint32_t version = get_u32(is);
    if (version != kSdfgVersion)
        throw ValidationError("load_sdfg: unsupported version " + std::to_string(version));
    uint32_t res = get_u32(is);
    if (res < 2 || res > 4096) throw ValidationError("load_sdfg: bad resolution in " + path);
    Vec3 origin{get_f64(is), get_f64(is), get_f64(is)};
    double spacing = get_f64(is);
    SdfGrid grid(static_cast<int>(res), origin, spacing);
    for (size_t idx = 0; idx < grid.voxel_count(); ++idx) grid.values()[idx] = get_f32(is);
    if (!is) throw IoError("load_sdfg: truncated file " + path);
    return grid;
}

}  // namespace crownfill

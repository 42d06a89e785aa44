#include "crownfill/csg.hpp"

#include <algorithm>

#include "crownfill/error.hpp"

namespace crownfill {

namespace {

template <typename Op>
SdfGrid combine(const SdfGrid& a, const SdfGrid& b, Op op, const char* name) {
    if (!a.same_spec(b))
        throw ValidationError(std::string(name) + ": grid spec mismatch");
    SdfGrid out = a;
    const size_t n = a.voxel_count();
    for (size_t idx = 0; idx < n; ++idx)
        out.values()[idx] = std::clamp(op(a.values()[idx], b.values()[idx]), -kTruncation, kTruncation);
    return out;
}

}  // namespace

SdfGrid csg_union(const SdfGrid& a, const SdfGrid& b) {
    return combine(a, b, [](float x, float y) { return std::min(x, y); }, "csg_union");
}

SdfGrid csg_intersection(const SdfGrid& a, const SdfGrid& b) {
    return combine(a, b, [](float x, float y) { return std::max(x, y); }, "csg_intersection");
}

SdfGrid csg_difference(const SdfGrid& a, const SdfGrid& b) {
    return combine(a, b, [](float x, float y) { return std::max(x, -y); }, "csg_difference");
}

}  // namespace crownfill

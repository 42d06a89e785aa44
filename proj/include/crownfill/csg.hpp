#pragma once

#include "crownfill/sdf_grid.hpp"

namespace crownfill {

// Voxelwise boolean algebra on grids with identical specs. Results are
// re-clamped to +-kTruncation. Booleaned grids are pseudo-distances away
// from the surface, which is fine for the damage pipeline.
SdfGrid csg_union(const SdfGrid& a, const SdfGrid& b);         // min(a, b)
SdfGrid csg_intersection(const SdfGrid& a, const SdfGrid& b);  // max(a, b)
SdfGrid csg_difference(const SdfGrid& a, const SdfGrid& b);    // max(a, -b)

}  // namespace crownfill

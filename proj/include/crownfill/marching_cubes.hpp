#pragma once

#include "crownfill/mesh.hpp"
#include "crownfill/sdf_grid.hpp"

namespace crownfill {

// Table-based isosurface triangulation with linear edge interpolation.
// Vertices land in world coordinates and are welded across cells (shared
// grid edges map to one vertex). Returns an empty mesh when the grid never
// crosses iso. Triangles are wound with outward (positive-side) normals.
TriangleMesh marching_cubes(const SdfGrid& grid, double iso = 0.0);

}  // namespace crownfill

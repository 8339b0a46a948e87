#pragma once

#include <span>

#include "sonofield/mc_bem.hpp"

namespace sonofield {

/// Centroid-collocation discretization of the same boundary equation: one
/// node per triangle, weight = triangle area, and the self-triangle replaced
/// by the equal-area disk of radius sqrt(area / pi).
BoundarySystem collocation_system(const TriMesh& mesh, std::span<const Complex> neumann, double k);

SolvedBoundaryField collocation_solve(const TriMesh& mesh, std::span<const Complex> neumann, double k,
                                      SolveOptions options = {});

}  // namespace sonofield

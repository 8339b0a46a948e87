#include "sonofield/collocation.hpp"

#include <cmath>
#include <numbers>

#include "sonofield/error.hpp"

namespace sonofield {

BoundarySystem collocation_system(const TriMesh& mesh, std::span<const Complex> neumann, double k) {
    const std::size_t n = mesh.num_triangles();
    if (neumann.size() != n) throw UsageError("Neumann vector length does not match triangle count");
    BoundarySamples nodes;
    nodes.total_area = mesh.total_area();
    nodes.points.reserve(n);
    std::vector<double> radii(n);
    double min_radius = INFINITY;
    for (std::size_t t = 0; t < n; ++t) {
        nodes.points.push_back(mesh.triangle_centroid(t));
        nodes.normals.push_back(mesh.normals()[t]);
        nodes.neumann.push_back(neumann[t]);
        nodes.triangle.push_back(static_cast<std::uint32_t>(t));
        radii[t] = std::sqrt(mesh.areas()[t] / std::numbers::pi);
        min_radius = std::min(min_radius, radii[t]);
    }
    // Used only for the near-field guard of exterior evaluation.
    nodes.disk_radius = min_radius;
    return assemble_weighted(std::move(nodes), k, mesh.areas(), std::move(radii), mesh.areas());
}

SolvedBoundaryField collocation_solve(const TriMesh& mesh, std::span<const Complex> neumann, double k,
                                      SolveOptions options) {
    return solve_boundary(collocation_system(mesh, neumann, k), options);
}

}  // namespace sonofield

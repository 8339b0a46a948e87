#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "sonofield/kernel.hpp"
#include "sonofield/sampling.hpp"
#include "sonofield/scenes.hpp"

namespace sonofield {

using DenseMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Collocated boundary integral system for the exterior Neumann problem.
///
/// Mesh normals point out of the radiating body, into the fluid. With that
/// orientation the collocated conventional equation reads
///
///   p_i / 2 - sum_{j != i} w_j dG/dn_j(y_i, y_j) p_j
///       = - sum_{j != i} w_j G(y_i, y_j) g_j - (eps_i / 2) g_i
///
/// where the last term is the single-layer integral over the self-disk of
/// radius eps_i and the double-layer self-disk contribution vanishes.
struct BoundarySystem {
    DenseMatrix matrix;
    Eigen::VectorXcd rhs;
    BoundarySamples samples;
    double k = 0.0;
    std::vector<double> weights;      // off-disk quadrature weight per node
    std::vector<double> disk_radii;   // self-disk radius per node
    std::vector<double> eval_weights; // weights of the exterior representation

    /// Uniform Monte-Carlo weight (|Gamma| - pi eps^2) / (M - 1); 0 when M == 1.
    [[nodiscard]] double weight() const { return weights.empty() ? 0.0 : weights.front(); }
};

struct SolveOptions {
    double tol = 1e-6;
    int max_iter = 200;
};

/// Boundary pressures plus everything needed to evaluate the exterior field.
struct SolvedBoundaryField {
    std::vector<Complex> dirichlet;
    BoundarySamples samples;
    double k = 0.0;
    std::vector<double> eval_weights;  // |Gamma| / M for Monte-Carlo fields
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;

    [[nodiscard]] std::size_t size() const { return dirichlet.size(); }
};

/// Monte-Carlo assembly over boundary samples.
BoundarySystem assemble_system(const BoundarySamples& samples, double k);

/// General assembly with per-node weights and self-disk radii; the
/// Monte-Carlo and centroid-collocation schemes both reduce to it.
BoundarySystem assemble_weighted(BoundarySamples samples, double k, std::vector<double> weights,
                                 std::vector<double> disk_radii, std::vector<double> eval_weights);

SolvedBoundaryField solve_boundary(const BoundarySystem& system, SolveOptions options = {});

/// Exterior pressure from the discrete representation formula
///   p(x) = sum_j W_j [dG/dn_j(x, y_j) p_j - G(x, y_j) g_j].
/// Throws UsageError when x is within the self-disk radius of a node.
Complex eval_exterior(const SolvedBoundaryField& field, const Vec3& x);
std::vector<Complex> eval_exterior(const SolvedBoundaryField& field, std::span<const Vec3> xs);

struct SceneSolveOptions {
    std::size_t samples = 2000;
    SamplerKind sampler = SamplerKind::poisson;
    std::uint64_t seed = 0;
    SolveOptions solver;
};

/// Sample, assemble and solve at frequency f (Hz), which must lie in the
/// scene's frequency range.
SolvedBoundaryField solve_scene(const SceneInstance& scene, double f, const SceneSolveOptions& options = {});
/// Same pipeline without the frequency-range check.
SolvedBoundaryField solve_mesh(const TriMesh& mesh, std::span<const Complex> neumann, double k,
                               const SceneSolveOptions& options = {});

/// Little-endian float64 layout: [M, k, eps, |Gamma|, points, normals,
/// g (re, im), p (re, im)], optionally followed by M evaluation weights when
/// they are not uniform.
void save_field(const SolvedBoundaryField& field, const std::filesystem::path& path);
SolvedBoundaryField load_field(const std::filesystem::path& path);

}  // namespace sonofield

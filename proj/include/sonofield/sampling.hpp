#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sonofield/geometry.hpp"
#include "sonofield/kernel.hpp"

namespace sonofield {

enum class SamplerKind { uniform, poisson };

/// Discretization nodes of the Monte-Carlo boundary solver.
struct BoundarySamples {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    std::vector<Complex> neumann;
    std::vector<std::uint32_t> triangle;  // containing triangle of each point
    double total_area = 0.0;
    double disk_radius = 0.0;     // epsilon of the singular self-disk
    double poisson_radius = 0.0;  // minimum spacing; 0 for uniform sampling
    SamplerKind kind = SamplerKind::uniform;
    std::uint64_t seed = 0;

    [[nodiscard]] std::size_t size() const { return points.size(); }
};

/// Self-disk radius sqrt(|Gamma| / (pi M)): the M disks cover |Gamma|.
double disk_radius_for(double total_area, std::size_t count);
/// Poisson-disk spacing 0.7 sqrt(|Gamma| / M_target).
double poisson_radius_for(double total_area, std::size_t target);

/// Area-uniform i.i.d. samples. `neumann` holds one value per triangle and
/// may be empty (all zero).
BoundarySamples sample_uniform(const TriMesh& mesh, std::span<const Complex> neumann, std::size_t count,
                               std::uint64_t seed);

/// Dart throwing with a minimum Euclidean spacing, accelerated by a uniform
/// hash grid; stops at the target count.
BoundarySamples sample_poisson_disk(const TriMesh& mesh, std::span<const Complex> neumann, std::size_t target,
                                    std::uint64_t seed);

BoundarySamples sample_surface(const TriMesh& mesh, std::span<const Complex> neumann, std::size_t count,
                               SamplerKind kind, std::uint64_t seed);

/// CSV with columns x,y,z,nx,ny,nz,re_g,im_g.
void write_samples_csv(const BoundarySamples& samples, const std::filesystem::path& path);

}  // namespace sonofield

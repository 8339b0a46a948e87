#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sonofield {

using Vec3 = Eigen::Vector3d;
using Tri = std::array<std::uint32_t, 3>;

/// Closed triangle surface with cached per-triangle normals and areas.
///
/// Construction validates indices, drops (or rejects, in strict mode)
/// zero-area triangles and flips the winding when the signed volume is
/// negative, so normals always point out of the enclosed solid. The mesh is
/// immutable afterwards.
class TriMesh {
public:
    TriMesh() = default;
    TriMesh(std::vector<Vec3> vertices, std::vector<Tri> triangles, bool strict = false);

    [[nodiscard]] const std::vector<Vec3>& vertices() const { return vertices_; }
    [[nodiscard]] const std::vector<Tri>& triangles() const { return triangles_; }
    [[nodiscard]] const std::vector<Vec3>& normals() const { return normals_; }
    [[nodiscard]] const std::vector<double>& areas() const { return areas_; }
    [[nodiscard]] std::size_t num_triangles() const { return triangles_.size(); }
    [[nodiscard]] double total_area() const { return total_area_; }
    [[nodiscard]] const Vec3& centroid() const { return centroid_; }
    /// Largest vertex distance from the area centroid.
    [[nodiscard]] double bounding_radius() const { return bounding_radius_; }
    [[nodiscard]] double signed_volume() const { return signed_volume_; }

    [[nodiscard]] Vec3 triangle_centroid(std::size_t t) const;
    [[nodiscard]] std::array<Vec3, 3> corners(std::size_t t) const;
    /// Point from barycentric weights (b1, b2) on triangle t.
    [[nodiscard]] Vec3 point_on(std::size_t t, double b1, double b2) const;
    /// Normalized shape quality 4*sqrt(3)*area / sum(edge^2); 1 for equilateral.
    [[nodiscard]] double aspect_quality(std::size_t t) const;
    [[nodiscard]] double min_aspect_quality() const;

private:
    std::vector<Vec3> vertices_;
    std::vector<Tri> triangles_;
    std::vector<Vec3> normals_;
    std::vector<double> areas_;
    double total_area_ = 0.0;
    double signed_volume_ = 0.0;
    double bounding_radius_ = 0.0;
    Vec3 centroid_ = Vec3::Zero();
};

struct LoadOptions {
    bool strict = false;  // error on degenerate triangles instead of dropping them
};

/// Reads the ASCII triangle-soup format: "v x y z" and "f i j k" lines with
/// 1-based indices; '#' starts a comment.
TriMesh load_mesh(const std::filesystem::path& path, LoadOptions options = {});
void save_mesh(const TriMesh& mesh, const std::filesystem::path& path);

/// Direction and distance of a point relative to an origin. theta is the
/// azimuth in [-pi, pi] (atan2(y, x)); phi is the polar angle from +z.
struct SphericalCoord {
    double theta = 0.0;
    double phi = 0.0;
    double r = 1.0;

    /// theta and phi mapped linearly onto [0, 1].
    [[nodiscard]] double theta_normalized() const;
    [[nodiscard]] double phi_normalized() const;
    /// r mapped linearly from [r_min, r_max] onto [0, 1].
    [[nodiscard]] double r_normalized(double r_min, double r_max) const;
};

SphericalCoord to_spherical(const Vec3& x, const Vec3& origin = Vec3::Zero());
Vec3 from_spherical(const SphericalCoord& s, const Vec3& origin = Vec3::Zero());

/// Scales vertices about the mesh centroid.
TriMesh apply_scale(const TriMesh& mesh, double s);
TriMesh translate(const TriMesh& mesh, const Vec3& offset);

/// Splits a fraction of triangles with edge splits placed very close to an
/// edge endpoint, producing sliver triangles on an unchanged surface.
/// Both triangles sharing a split edge are split so the mesh stays
/// watertight.
TriMesh degrade_mesh(const TriMesh& mesh, double fraction, std::uint64_t seed);

/// Concatenates closed components into one mesh.
TriMesh merge(std::span<const TriMesh> parts);

// Procedural surfaces.
TriMesh make_icosphere(int subdivisions, double radius = 1.0, const Vec3& center = Vec3::Zero());
TriMesh make_box(const Vec3& lo, const Vec3& hi);

/// Surface of revolution about the +y axis. The profile is a polyline of
/// (radius, height) points whose first and last points lie on the axis
/// (radius 0); each profile segment is split into pieces no longer than
/// max_edge, and the revolution uses `segments` angular steps.
TriMesh make_lathe(std::span<const std::array<double, 2>> profile, int segments, double max_edge,
                   const Vec3& base = Vec3::Zero());

}  // namespace sonofield

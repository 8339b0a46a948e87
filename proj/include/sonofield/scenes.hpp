#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sonofield/geometry.hpp"
#include "sonofield/kernel.hpp"

namespace sonofield {

/// Normalized scene parameters, each in [0, 1].
struct ConditionVector {
    std::vector<double> values;
    std::vector<std::string> labels;

    [[nodiscard]] std::size_t size() const { return values.size(); }
    void validate() const;
};

struct PulsatingSphere {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
    double neumann = 1.0;  // uniform outward normal derivative
};

struct PointSource {
    enum class Kind { monopole, dipole };
    Kind kind = Kind::monopole;
    Vec3 position = Vec3::Zero();
    Vec3 axis = Vec3::UnitZ();  // dipole moment direction
    double strength = 1.0;
};

/// Point sources enclosed by a surface. Evaluation is refused inside the
/// exclusion sphere (center, exclusion_radius), which should contain the
/// enclosing surface.
struct InteriorSources {
    std::vector<PointSource> sources;
    Vec3 center = Vec3::Zero();
    double exclusion_radius = 0.0;
};

using OracleSpec = std::variant<PulsatingSphere, InteriorSources>;

/// Closed-form exterior pressure of an oracle configuration.
Complex analytic_field(const OracleSpec& oracle, const Vec3& x, double k);
/// Gradient of analytic_field with respect to x (complex components).
Eigen::Vector3cd analytic_gradient(const OracleSpec& oracle, const Vec3& x, double k);

/// Generalized winding number: ~1 inside a closed outward-oriented mesh, ~0 outside.
double winding_number(const TriMesh& mesh, const Vec3& p);

/// Analytic normal derivative of the oracle field at each triangle centroid.
std::vector<Complex> oracle_neumann(const OracleSpec& oracle, const TriMesh& mesh, double k);

/// Scene registry key plus fixed parameters, e.g. {"source_in_cup", {{"cup_width", 0.08}}}.
struct SceneSpec {
    std::string id;
    std::map<std::string, double> params;
    /// Optional per-triangle Neumann override (one complex value per line).
    std::optional<std::filesystem::path> neumann_file;
};

struct SceneInstance {
    TriMesh mesh;
    std::vector<Complex> neumann;  // per triangle
    double f_min = 0.0;
    double f_max = 0.0;
    std::vector<std::string> labels;
    /// Scene envelope used for listener shells: fixed per SceneSpec so that
    /// spherical coordinates are comparable across condition values.
    Vec3 origin = Vec3::Zero();
    double reference_radius = 1.0;
    std::optional<OracleSpec> oracle;
};

std::vector<std::string> scene_ids();
/// Condition labels of a scene (dimension n of v).
std::vector<std::string> scene_condition_labels(const SceneSpec& spec);
SceneInstance build_scene(const SceneSpec& spec, const ConditionVector& v);
SceneInstance build_scene(const SceneSpec& spec, const std::vector<double>& v);

/// Parses one complex value per line: "re" or "re im".
std::vector<Complex> load_neumann(const std::filesystem::path& path);
void save_neumann(const std::vector<Complex>& values, const std::filesystem::path& path);

}  // namespace sonofield

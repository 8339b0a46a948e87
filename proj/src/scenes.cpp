#include "sonofield/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "sonofield/error.hpp"

namespace sonofield {

namespace {

constexpr double kPi = std::numbers::pi;
// Evaluation points may sit this far (relative) inside the oracle's
// exclusion sphere before being rejected; facet centroids of a sphere mesh
// lie slightly inside the exact sphere.
constexpr double kContainmentSlack = 1e-2;

// G(R) and its first two radial derivatives.
struct RadialGreen {
    Complex g, d1, d2;
};

RadialGreen radial_green(double R, double k) {
    const Complex e = std::polar(1.0, k * R) / (4.0 * kPi);
    const Complex ikr(0.0, k * R);
    return {e / R, e * (ikr - 1.0) / (R * R), e * (2.0 - 2.0 * ikr - k * k * R * R) / (R * R * R)};
}

Complex field_unchecked(const OracleSpec& oracle, const Vec3& x, double k) {
    if (const auto* ps = std::get_if<PulsatingSphere>(&oracle)) {
        const double R = (x - ps->center).norm();
        const double a = ps->radius;
        return ps->neumann * a * a * std::polar(1.0, k * (R - a)) / (Complex(0.0, k * a) - 1.0) / R;
    }
    const auto& is = std::get<InteriorSources>(oracle);
    Complex p = 0.0;
    for (const PointSource& s : is.sources) {
        const Vec3 d = x - s.position;
        const double R = d.norm();
        if (R < kSingularDistance) throw NumericError("oracle evaluated at a source position");
        const RadialGreen G = radial_green(R, k);
        if (s.kind == PointSource::Kind::monopole)
            p += s.strength * G.g;
        else
            p += s.strength * G.d1 * (s.axis.dot(d) / R);
    }
    return p;
}

Eigen::Vector3cd gradient_unchecked(const OracleSpec& oracle, const Vec3& x, double k) {
    Eigen::Vector3cd grad = Eigen::Vector3cd::Zero();
    if (const auto* ps = std::get_if<PulsatingSphere>(&oracle)) {
        const Vec3 d = x - ps->center;
        const double R = d.norm();
        const double a = ps->radius;
        const Complex dp_dr = ps->neumann * a * a * std::polar(1.0, k * (R - a)) / (Complex(0.0, k * a) - 1.0) *
                              (Complex(0.0, k * R) - 1.0) / (R * R);
        return dp_dr * (d / R).cast<Complex>();
    }
    const auto& is = std::get<InteriorSources>(oracle);
    for (const PointSource& s : is.sources) {
        const Vec3 d = x - s.position;
        const double R = d.norm();
        if (R < kSingularDistance) throw NumericError("oracle evaluated at a source position");
        const Vec3 rhat = d / R;
        const RadialGreen G = radial_green(R, k);
        if (s.kind == PointSource::Kind::monopole) {
            grad += s.strength * G.d1 * rhat.cast<Complex>();
        } else {
            // Hessian of G applied to the dipole axis.
            const double ra = rhat.dot(s.axis);
            grad += s.strength * (G.d2 * ra * rhat.cast<Complex>() +
                                  G.d1 / R * (s.axis - ra * rhat).cast<Complex>());
        }
    }
    return grad;
}

void check_exterior(const OracleSpec& oracle, const Vec3& x) {
    Vec3 center;
    double radius;
    if (const auto* ps = std::get_if<PulsatingSphere>(&oracle)) {
        center = ps->center;
        radius = ps->radius;
    } else {
        const auto& is = std::get<InteriorSources>(oracle);
        center = is.center;
        radius = is.exclusion_radius;
    }
    if ((x - center).norm() < radius * (1.0 - kContainmentSlack))
        throw UsageError("analytic field requested inside the radiating surface");
}

double param(const SceneSpec& spec, const std::string& name, double fallback) {
    auto it = spec.params.find(name);
    return it == spec.params.end() ? fallback : it->second;
}

int int_param(const SceneSpec& spec, const std::string& name, int fallback) {
    return static_cast<int>(std::lround(param(spec, name, fallback)));
}

double lerp(double lo, double hi, double t) { return lo + (hi - lo) * t; }

SceneInstance pulsating_sphere(const SceneSpec& spec, const ConditionVector& v) {
    const double r_lo = param(spec, "radius_min", 0.1);
    const double r_hi = param(spec, "radius_max", 0.2);
    const double a = lerp(r_lo, r_hi, v.values[0]);
    SceneInstance s;
    s.mesh = make_icosphere(int_param(spec, "subdivisions", 4), a);
    s.neumann.assign(s.mesh.num_triangles(), Complex(1.0, 0.0));
    s.f_min = param(spec, "f_min", 20.0);
    s.f_max = param(spec, "f_max", 600.0);
    s.reference_radius = r_hi;
    s.oracle = PulsatingSphere{Vec3::Zero(), a, 1.0};
    return s;
}

SceneInstance piston_sphere(const SceneSpec& spec, const ConditionVector& v) {
    const double a = param(spec, "radius", 0.15);
    const double half_angle = kPi * v.values[0];
    SceneInstance s;
    s.mesh = make_icosphere(int_param(spec, "subdivisions", 4), a);
    s.neumann.resize(s.mesh.num_triangles());
    for (std::size_t t = 0; t < s.mesh.num_triangles(); ++t) {
        const SphericalCoord c = to_spherical(s.mesh.triangle_centroid(t));
        s.neumann[t] = c.phi <= half_angle ? 1.0 : 0.0;
    }
    s.f_min = param(spec, "f_min", 20.0);
    s.f_max = param(spec, "f_max", 800.0);
    s.reference_radius = a;
    return s;
}

// A thick-walled cup open towards +y with a small cylindrical source whose
// bottom face vibrates. The source rises along the cup axis.
SceneInstance source_in_cup(const SceneSpec& spec, const ConditionVector& v) {
    constexpr double kMaxLift = 0.3;
    constexpr double kGap = 0.02;
    const double wall = param(spec, "wall", 0.02);
    const double cup_height = param(spec, "cup_height", 0.12);
    const double w_lo = 0.05, w_hi = 0.1;
    const double lift = kMaxLift * v.values[0];
    const double width = spec.params.contains("cup_width") ? spec.params.at("cup_width") : lerp(w_lo, w_hi, v.values[1]);
    const double src_radius = param(spec, "source_radius", 0.015);
    const double src_height = param(spec, "source_height", 0.04);
    const double edge = param(spec, "max_edge", 0.008);
    const int segments = int_param(spec, "segments", 40);

    const double ri = 0.5 * width, ro = ri + wall;
    const std::array<std::array<double, 2>, 6> cup_profile{
        {{0.0, 0.0}, {ro, 0.0}, {ro, cup_height}, {ri, cup_height}, {ri, wall}, {0.0, wall}}};
    const double src_base = wall + kGap + lift;
    const std::array<std::array<double, 2>, 4> src_profile{
        {{0.0, 0.0}, {src_radius, 0.0}, {src_radius, src_height}, {0.0, src_height}}};

    const TriMesh parts[] = {make_lathe(cup_profile, segments, edge),
                             make_lathe(src_profile, std::max(16, segments / 2), edge * 0.5,
                                        Vec3(0.0, src_base, 0.0))};
    SceneInstance s;
    s.mesh = merge(parts);
    const std::size_t n_cup = parts[0].num_triangles();
    s.neumann.assign(s.mesh.num_triangles(), 0.0);
    for (std::size_t t = n_cup; t < s.mesh.num_triangles(); ++t)
        if (s.mesh.normals()[t].y() < -0.9) s.neumann[t] = 1.0;
    s.f_min = param(spec, "f_min", 10.0);
    s.f_max = param(spec, "f_max", 2000.0);
    // Envelope over the full lift range at the widest cup.
    const double top = wall + kGap + kMaxLift + src_height;
    s.origin = Vec3(0.0, 0.5 * top, 0.0);
    s.reference_radius = std::hypot(0.5 * top, 0.5 * w_hi + wall);
    return s;
}

// Circular plate moving rigidly along its axis; the condition is the
// product of diameter and frequency.
SceneInstance plate_scaled(const SceneSpec& spec, const ConditionVector& v) {
    const double d = param(spec, "diameter", 0.15);
    const double thickness = param(spec, "thickness", 0.1 * d);
    const double fd = lerp(param(spec, "fd_min", 5.0), param(spec, "fd_max", 250.0), v.values[0]);
    const std::array<std::array<double, 2>, 4> profile{
        {{0.0, -0.5 * thickness}, {0.5 * d, -0.5 * thickness}, {0.5 * d, 0.5 * thickness}, {0.0, 0.5 * thickness}}};
    SceneInstance s;
    s.mesh = make_lathe(profile, int_param(spec, "segments", 48), param(spec, "max_edge", d / 24.0));
    s.neumann.resize(s.mesh.num_triangles());
    for (std::size_t t = 0; t < s.mesh.num_triangles(); ++t) s.neumann[t] = s.mesh.normals()[t].y();
    s.f_min = s.f_max = fd / d;
    s.reference_radius = s.mesh.bounding_radius();
    return s;
}

// Unit-scale sphere around three y-axis dipoles; Neumann data are the
// analytic normal derivatives at a fixed wavenumber.
SceneInstance manufactured(const SceneSpec& spec, const ConditionVector&) {
    const double a = param(spec, "radius", 1.0);
    const double k = param(spec, "k", 2.0);
    SceneInstance s;
    s.mesh = make_icosphere(int_param(spec, "subdivisions", 4), a);
    InteriorSources sources;
    sources.center = Vec3::Zero();
    sources.exclusion_radius = a;
    const double ys[] = {-0.4, 0.0, 0.4};
    const double strengths[] = {1.0, 0.5, -0.75};
    for (int i = 0; i < 3; ++i)
        sources.sources.push_back(
            {PointSource::Kind::dipole, Vec3(0.0, ys[i] * a, 0.0), Vec3::UnitY(), strengths[i]});
    s.oracle = sources;
    s.neumann = oracle_neumann(*s.oracle, s.mesh, k);
    s.f_min = s.f_max = Wavenumber(k).frequency();
    s.reference_radius = a;
    return s;
}

struct Registered {
    const char* id;
    std::vector<std::string> labels;
    SceneInstance (*build)(const SceneSpec&, const ConditionVector&);
};

const std::vector<Registered>& registry() {
    static const std::vector<Registered> r = {
        {"pulsating_sphere", {"radius"}, pulsating_sphere},
        {"piston_sphere", {"cap_half_angle"}, piston_sphere},
        {"source_in_cup", {"source_height", "cup_width"}, source_in_cup},
        {"plate_scaled", {"size_frequency"}, plate_scaled},
        {"manufactured", {}, manufactured},
    };
    return r;
}

const Registered& lookup(const std::string& id) {
    for (const Registered& r : registry())
        if (id == r.id) return r;
    throw UsageError("unknown scene id '" + id + "'");
}

}  // namespace

void ConditionVector::validate() const {
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!(values[i] >= 0.0 && values[i] <= 1.0))
            throw UsageError("condition component " + std::to_string(i) + " outside [0, 1]");
}

Complex analytic_field(const OracleSpec& oracle, const Vec3& x, double k) {
    if (!(k >= 0.0)) throw UsageError("wavenumber must be >= 0");
    check_exterior(oracle, x);
    return field_unchecked(oracle, x, k);
}

Eigen::Vector3cd analytic_gradient(const OracleSpec& oracle, const Vec3& x, double k) {
    return gradient_unchecked(oracle, x, k);
}

double winding_number(const TriMesh& mesh, const Vec3& p) {
    double total = 0.0;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const auto [A, B, C] = mesh.corners(t);
        const Vec3 a = A - p, b = B - p, c = C - p;
        const double la = a.norm(), lb = b.norm(), lc = c.norm();
        const double num = a.dot(b.cross(c));
        const double den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
        total += 2.0 * std::atan2(num, den);
    }
    return total / (4.0 * kPi);
}

std::vector<Complex> oracle_neumann(const OracleSpec& oracle, const TriMesh& mesh, double k) {
    std::vector<Vec3> inner;
    if (const auto* ps = std::get_if<PulsatingSphere>(&oracle))
        inner.push_back(ps->center);
    else
        for (const PointSource& s : std::get<InteriorSources>(oracle).sources) inner.push_back(s.position);
    for (const Vec3& p : inner)
        if (winding_number(mesh, p) < 0.5) throw UsageError("oracle source lies on or outside the surface");

    std::vector<Complex> g(mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const Eigen::Vector3cd grad = gradient_unchecked(oracle, mesh.triangle_centroid(t), k);
        const Vec3& n = mesh.normals()[t];
        g[t] = grad.x() * n.x() + grad.y() * n.y() + grad.z() * n.z();
    }
    return g;
}

std::vector<std::string> scene_ids() {
    std::vector<std::string> ids;
    for (const Registered& r : registry()) ids.emplace_back(r.id);
    return ids;
}

std::vector<std::string> scene_condition_labels(const SceneSpec& spec) {
    std::vector<std::string> labels = lookup(spec.id).labels;
    if (spec.id == "source_in_cup" && spec.params.contains("cup_width")) labels.pop_back();
    return labels;
}

SceneInstance build_scene(const SceneSpec& spec, const ConditionVector& v) {
    const Registered& reg = lookup(spec.id);
    const std::vector<std::string> labels = scene_condition_labels(spec);
    if (v.size() != labels.size())
        throw UsageError("scene '" + spec.id + "' expects " + std::to_string(labels.size()) +
                         " condition values, got " + std::to_string(v.size()));
    v.validate();
    SceneInstance s = reg.build(spec, v);
    s.labels = labels;
    if (spec.neumann_file) {
        s.neumann = load_neumann(*spec.neumann_file);
        if (s.neumann.size() != s.mesh.num_triangles())
            throw DataError("Neumann file has " + std::to_string(s.neumann.size()) + " values for " +
                            std::to_string(s.mesh.num_triangles()) + " triangles");
        s.oracle.reset();
    }
    if (std::none_of(s.neumann.begin(), s.neumann.end(), [](Complex g) { return g != 0.0; }))
        throw DataError("no active surface: all Neumann values are zero");
    return s;
}

SceneInstance build_scene(const SceneSpec& spec, const std::vector<double>& v) {
    return build_scene(spec, ConditionVector{v, scene_condition_labels(spec)});
}

std::vector<Complex> load_neumann(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open Neumann file " + path.string());
    std::vector<Complex> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double re, im = 0.0;
        if (!(ls >> re)) continue;
        ls >> im;
        if (!std::isfinite(re) || !std::isfinite(im))
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-finite Neumann value");
        values.emplace_back(re, im);
    }
    return values;
}

void save_neumann(const std::vector<Complex>& values, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write Neumann file " + path.string());
    out.precision(17);
    for (Complex g : values) out << g.real() << ' ' << g.imag() << '\n';
}

}  // namespace sonofield

#include "sonofield/mc_bem.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "sonofield/binary_io.hpp"
#include "sonofield/error.hpp"
#include "sonofield/gmres.hpp"

namespace sonofield {

namespace {

constexpr double kInvFourPi = 1.0 / (4.0 * std::numbers::pi);

// G and dG/dn_y for a separation d = y - x of length r.
struct KernelPair {
    Complex g;
    Complex dg_dn;
};

inline KernelPair kernels(const Vec3& d, double r, const Vec3& n_y, double k) {
    const double kr = k * r;
    const double c = std::cos(kr), s = std::sin(kr);
    const double inv = kInvFourPi / r;
    const double dn = d.dot(n_y) / (r * r * r) * kInvFourPi;
    return {Complex(c * inv, s * inv), -Complex(c + kr * s, s - kr * c) * dn};
}

}  // namespace

BoundarySystem assemble_weighted(BoundarySamples samples, double k, std::vector<double> weights,
                                 std::vector<double> disk_radii, std::vector<double> eval_weights) {
    const std::size_t m = samples.size();
    if (m < 1) throw UsageError("boundary system needs at least one sample");
    if (weights.size() != m || disk_radii.size() != m || eval_weights.size() != m)
        throw UsageError("per-node weight vectors must match the sample count");
    if (!(k >= 0.0) || !std::isfinite(k)) throw UsageError("wavenumber must be finite and >= 0");

    BoundarySystem sys;
    sys.matrix.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    sys.rhs.resize(static_cast<Eigen::Index>(m));
    const auto& y = samples.points;
    const auto& n = samples.normals;
    const auto& g = samples.neumann;

    constexpr auto kNoPair = std::numeric_limits<std::size_t>::max();
    std::atomic<std::size_t> bad_row{kNoPair};
    std::vector<std::size_t> bad_col(m, kNoPair);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(m); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        Complex rhs = -0.5 * disk_radii[i] * g[i];
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) {
                sys.matrix(ii, ii) = 0.5;
                continue;
            }
            const Vec3 d = y[j] - y[i];
            const double r = d.norm();
            if (r < kSingularDistance) {
                bad_col[i] = j;
                std::size_t expected = bad_row.load();
                while (i < expected && !bad_row.compare_exchange_weak(expected, i)) {
                }
                sys.matrix(ii, static_cast<Eigen::Index>(j)) = 0.0;
                continue;
            }
            const KernelPair kp = kernels(d, r, n[j], k);
            sys.matrix(ii, static_cast<Eigen::Index>(j)) = -weights[j] * kp.dg_dn;
            rhs -= weights[j] * kp.g * g[j];
        }
        sys.rhs(ii) = rhs;
    }
    if (const std::size_t i = bad_row.load(); i != kNoPair)
        throw NumericError("coincident samples " + std::to_string(i) + " and " + std::to_string(bad_col[i]) +
                           " (distance < 1e-12)");

    sys.samples = std::move(samples);
    sys.k = k;
    sys.weights = std::move(weights);
    sys.disk_radii = std::move(disk_radii);
    sys.eval_weights = std::move(eval_weights);
    return sys;
}

BoundarySystem assemble_system(const BoundarySamples& samples, double k) {
    const std::size_t m = samples.size();
    if (m < 1) throw UsageError("boundary system needs at least one sample");
    const double eps = samples.disk_radius;
    const double area = samples.total_area;
    const double w = m > 1 ? (area - std::numbers::pi * eps * eps) / static_cast<double>(m - 1) : 0.0;
    return assemble_weighted(samples, k, std::vector<double>(m, w), std::vector<double>(m, eps),
                             std::vector<double>(m, area / static_cast<double>(m)));
}

SolvedBoundaryField solve_boundary(const BoundarySystem& system, SolveOptions options) {
    if (!(options.tol > 0.0) || options.max_iter < 1) throw UsageError("invalid GMRES settings");
    if (!system.matrix.allFinite() || !system.rhs.allFinite())
        throw NumericError("non-finite entries in boundary system");
    const DenseMatrix& a = system.matrix;
    auto apply = [&a](const Eigen::VectorXcd& x, Eigen::VectorXcd& out) {
        out.resize(a.rows());
#pragma omp parallel for schedule(static)
        for (Eigen::Index i = 0; i < a.rows(); ++i) out(i) = a.row(i).cwiseProduct(x.transpose()).sum();
    };
    const GmresResult r = gmres(apply, system.rhs, options.tol, options.max_iter);
    SolvedBoundaryField field;
    field.dirichlet.assign(r.x.data(), r.x.data() + r.x.size());
    field.samples = system.samples;
    field.k = system.k;
    field.eval_weights = system.eval_weights;
    field.iterations = r.iterations;
    field.residual = r.residual;
    field.converged = r.converged;
    return field;
}

Complex eval_exterior(const SolvedBoundaryField& field, const Vec3& x) {
    const auto& y = field.samples.points;
    const auto& n = field.samples.normals;
    const auto& g = field.samples.neumann;
    const double eps = field.samples.disk_radius;
    Complex p = 0.0;
    for (std::size_t j = 0; j < field.size(); ++j) {
        const Vec3 d = y[j] - x;
        const double r = d.norm();
        if (r <= eps) throw UsageError("evaluation point lies within the self-disk radius of the boundary");
        const KernelPair kp = kernels(d, r, n[j], field.k);
        p += field.eval_weights[j] * (kp.dg_dn * field.dirichlet[j] - kp.g * g[j]);
    }
    return p;
}

std::vector<Complex> eval_exterior(const SolvedBoundaryField& field, std::span<const Vec3> xs) {
    std::vector<Complex> out(xs.size());
    std::atomic<bool> near{false};
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(xs.size()); ++i) {
        try {
            out[static_cast<std::size_t>(i)] = eval_exterior(field, xs[static_cast<std::size_t>(i)]);
        } catch (const UsageError&) {
            near = true;
        }
    }
    if (near) throw UsageError("evaluation point lies within the self-disk radius of the boundary");
    return out;
}

SolvedBoundaryField solve_mesh(const TriMesh& mesh, std::span<const Complex> neumann, double k,
                               const SceneSolveOptions& options) {
    const BoundarySamples samples = sample_surface(mesh, neumann, options.samples, options.sampler, options.seed);
    return solve_boundary(assemble_system(samples, k), options.solver);
}

SolvedBoundaryField solve_scene(const SceneInstance& scene, double f, const SceneSolveOptions& options) {
    const double slack = 1e-9 * std::max(1.0, scene.f_max);
    if (!(f >= scene.f_min - slack && f <= scene.f_max + slack))
        throw UsageError("frequency " + std::to_string(f) + " Hz outside the scene range [" +
                         std::to_string(scene.f_min) + ", " + std::to_string(scene.f_max) + "]");
    return solve_mesh(scene.mesh, scene.neumann, Wavenumber::from_frequency(f).value(), options);
}

void save_field(const SolvedBoundaryField& field, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    const std::size_t m = field.size();
    const BoundarySamples& s = field.samples;
    binio::put<double>(out, static_cast<double>(m));
    binio::put<double>(out, field.k);
    binio::put<double>(out, s.disk_radius);
    binio::put<double>(out, s.total_area);
    for (const Vec3& p : s.points)
        for (int c = 0; c < 3; ++c) binio::put<double>(out, p[c]);
    for (const Vec3& nrm : s.normals)
        for (int c = 0; c < 3; ++c) binio::put<double>(out, nrm[c]);
    for (Complex g : s.neumann) {
        binio::put<double>(out, g.real());
        binio::put<double>(out, g.imag());
    }
    for (Complex p : field.dirichlet) {
        binio::put<double>(out, p.real());
        binio::put<double>(out, p.imag());
    }
    const double uniform = s.total_area / static_cast<double>(m);
    bool non_uniform = false;
    for (double w : field.eval_weights) non_uniform |= (w != uniform);
    if (non_uniform)
        for (double w : field.eval_weights) binio::put<double>(out, w);
    if (!out) throw DataError("failed writing " + path.string());
}

SolvedBoundaryField load_field(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    const auto file_size = static_cast<std::uintmax_t>(std::filesystem::file_size(path));
    const double m_raw = binio::get<double>(in, "M");
    if (!(m_raw >= 1.0) || m_raw != std::floor(m_raw) || m_raw > 1e8) throw DataError("invalid sample count in field file");
    const auto m = static_cast<std::size_t>(m_raw);
    SolvedBoundaryField field;
    BoundarySamples& s = field.samples;
    field.k = binio::get<double>(in, "k");
    s.disk_radius = binio::get<double>(in, "eps");
    s.total_area = binio::get<double>(in, "area");
    s.points.resize(m);
    s.normals.resize(m);
    s.neumann.resize(m);
    field.dirichlet.resize(m);
    for (Vec3& p : s.points)
        for (int c = 0; c < 3; ++c) p[c] = binio::get<double>(in, "points");
    for (Vec3& nrm : s.normals)
        for (int c = 0; c < 3; ++c) nrm[c] = binio::get<double>(in, "normals");
    for (Complex& g : s.neumann) {
        const double re = binio::get<double>(in, "neumann");
        g = Complex(re, binio::get<double>(in, "neumann"));
    }
    for (Complex& p : field.dirichlet) {
        const double re = binio::get<double>(in, "dirichlet");
        p = Complex(re, binio::get<double>(in, "dirichlet"));
    }
    const std::uintmax_t base = 8 * (4 + 10 * m);
    if (file_size == base) {
        field.eval_weights.assign(m, s.total_area / static_cast<double>(m));
    } else if (file_size == base + 8 * m) {
        field.eval_weights.resize(m);
        for (double& w : field.eval_weights) w = binio::get<double>(in, "weights");
    } else {
        throw DataError("field file size " + std::to_string(file_size) + " does not match M = " + std::to_string(m));
    }
    field.converged = true;
    return field;
}

}  // namespace sonofield

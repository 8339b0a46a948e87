#include "sonofield/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <unordered_map>

#include "sonofield/error.hpp"
#include "sonofield/rng.hpp"

namespace sonofield {

namespace {

constexpr int kRejectionsPerSample = 30;

// Area-weighted triangle picker with uniform barycentric placement.
class SurfaceDarts {
public:
    explicit SurfaceDarts(const TriMesh& mesh) : mesh_(mesh), cdf_(mesh.num_triangles()) {
        double acc = 0.0;
        for (std::size_t t = 0; t < cdf_.size(); ++t) cdf_[t] = (acc += mesh.areas()[t]);
    }

    std::pair<std::uint32_t, Vec3> draw(Rng& rng) const {
        const double u = rng.uniform() * cdf_.back();
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        const auto t = static_cast<std::uint32_t>(std::min<std::size_t>(it - cdf_.begin(), cdf_.size() - 1));
        double b1 = rng.uniform(), b2 = rng.uniform();
        if (b1 + b2 > 1.0) {
            b1 = 1.0 - b1;
            b2 = 1.0 - b2;
        }
        return {t, mesh_.point_on(t, b1, b2)};
    }

private:
    const TriMesh& mesh_;
    std::vector<double> cdf_;
};

BoundarySamples empty_samples(const TriMesh& mesh, SamplerKind kind, std::uint64_t seed) {
    BoundarySamples s;
    s.total_area = mesh.total_area();
    s.kind = kind;
    s.seed = seed;
    return s;
}

void push_sample(BoundarySamples& s, const TriMesh& mesh, std::span<const Complex> neumann, std::uint32_t t,
                 const Vec3& p) {
    s.points.push_back(p);
    s.normals.push_back(mesh.normals()[t]);
    s.neumann.push_back(neumann.empty() ? Complex(0.0) : neumann[t]);
    s.triangle.push_back(t);
}

void check_neumann(const TriMesh& mesh, std::span<const Complex> neumann) {
    if (!neumann.empty() && neumann.size() != mesh.num_triangles())
        throw UsageError("Neumann vector length does not match triangle count");
}

struct CellKey {
    std::int64_t x, y, z;
    bool operator==(const CellKey&) const = default;
};

struct CellHash {
    std::size_t operator()(const CellKey& c) const {
        return static_cast<std::size_t>(c.x * 73856093LL ^ c.y * 19349663LL ^ c.z * 83492791LL);
    }
};

}  // namespace

double disk_radius_for(double total_area, std::size_t count) {
    return std::sqrt(total_area / (std::numbers::pi * static_cast<double>(count)));
}

double poisson_radius_for(double total_area, std::size_t target) {
    return 0.7 * std::sqrt(total_area / static_cast<double>(target));
}

BoundarySamples sample_uniform(const TriMesh& mesh, std::span<const Complex> neumann, std::size_t count,
                               std::uint64_t seed) {
    if (count < 1) throw UsageError("sample count must be >= 1");
    check_neumann(mesh, neumann);
    BoundarySamples s = empty_samples(mesh, SamplerKind::uniform, seed);
    SurfaceDarts darts(mesh);
    Rng rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const auto [t, p] = darts.draw(rng);
        push_sample(s, mesh, neumann, t, p);
    }
    s.disk_radius = disk_radius_for(s.total_area, count);
    return s;
}

BoundarySamples sample_poisson_disk(const TriMesh& mesh, std::span<const Complex> neumann, std::size_t target,
                                    std::uint64_t seed) {
    if (target < 4) throw UsageError("Poisson-disk target count must be >= 4");
    check_neumann(mesh, neumann);
    BoundarySamples s = empty_samples(mesh, SamplerKind::poisson, seed);
    const double r = poisson_radius_for(mesh.total_area(), target);
    const double r2 = r * r;
    s.poisson_radius = r;

    std::unordered_map<CellKey, std::vector<std::uint32_t>, CellHash> grid;
    auto cell_of = [r](const Vec3& p) {
        return CellKey{static_cast<std::int64_t>(std::floor(p.x() / r)), static_cast<std::int64_t>(std::floor(p.y() / r)),
                       static_cast<std::int64_t>(std::floor(p.z() / r))};
    };

    SurfaceDarts darts(mesh);
    Rng rng(seed);
    const std::size_t budget = kRejectionsPerSample * target;
    std::size_t rejections = 0;
    while (s.size() < target && rejections < budget) {
        const auto [t, p] = darts.draw(rng);
        const CellKey c = cell_of(p);
        bool free = true;
        for (std::int64_t dx = -1; dx <= 1 && free; ++dx)
            for (std::int64_t dy = -1; dy <= 1 && free; ++dy)
                for (std::int64_t dz = -1; dz <= 1 && free; ++dz) {
                    auto it = grid.find({c.x + dx, c.y + dy, c.z + dz});
                    if (it == grid.end()) continue;
                    for (std::uint32_t j : it->second)
                        if ((s.points[j] - p).squaredNorm() < r2) {
                            free = false;
                            break;
                        }
                }
        if (!free) {
            ++rejections;
            continue;
        }
        grid[c].push_back(static_cast<std::uint32_t>(s.size()));
        push_sample(s, mesh, neumann, t, p);
    }
    if (static_cast<double>(s.size()) < 0.85 * static_cast<double>(target))
        throw NumericError("Poisson-disk radius infeasible: placed " + std::to_string(s.size()) + " of " +
                           std::to_string(target) + " samples after max retries");
    s.disk_radius = disk_radius_for(s.total_area, s.size());
    return s;
}

BoundarySamples sample_surface(const TriMesh& mesh, std::span<const Complex> neumann, std::size_t count,
                               SamplerKind kind, std::uint64_t seed) {
    return kind == SamplerKind::poisson ? sample_poisson_disk(mesh, neumann, count, seed)
                                        : sample_uniform(mesh, neumann, count, seed);
}

void write_samples_csv(const BoundarySamples& samples, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out.precision(17);
    out << "x,y,z,nx,ny,nz,re_g,im_g\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Vec3& p = samples.points[i];
        const Vec3& n = samples.normals[i];
        out << p.x() << ',' << p.y() << ',' << p.z() << ',' << n.x() << ',' << n.y() << ',' << n.z() << ','
            << samples.neumann[i].real() << ',' << samples.neumann[i].imag() << '\n';
    }
}

}  // namespace sonofield

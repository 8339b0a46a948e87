#include "sonofield/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <queue>
#include <sstream>
#include <string>
#include <unordered_map>

#include "sonofield/error.hpp"
#include "sonofield/rng.hpp"

namespace sonofield {

namespace {

constexpr double kDegenerateArea = 1e-14;

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

// True when triangle t traverses the directed edge a -> b.
bool has_directed_edge(const Tri& t, std::uint32_t a, std::uint32_t b) {
    for (int i = 0; i < 3; ++i)
        if (t[i] == a && t[(i + 1) % 3] == b) return true;
    return false;
}

void flip(Tri& t) { std::swap(t[1], t[2]); }

double tri_signed_volume(const Vec3& a, const Vec3& b, const Vec3& c) {
    return a.dot(b.cross(c)) / 6.0;
}

// Makes winding consistent within each connected component and outward
// (positive signed volume) per component.
void orient(const std::vector<Vec3>& v, std::vector<Tri>& tris, bool strict) {
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> edge_tris;
    edge_tris.reserve(tris.size() * 2);
    for (std::uint32_t t = 0; t < tris.size(); ++t)
        for (int i = 0; i < 3; ++i) edge_tris[edge_key(tris[t][i], tris[t][(i + 1) % 3])].push_back(t);

    std::size_t boundary_edges = 0;
    for (const auto& [key, list] : edge_tris) {
        if (list.size() == 1) ++boundary_edges;
        if (list.size() > 2) throw DataError("non-manifold edge shared by more than two triangles");
    }
    if (boundary_edges > 0) {
        std::string msg = "mesh is not closed: " + std::to_string(boundary_edges) + " boundary edges";
        if (strict) throw DataError(msg);
        warn(msg);
    }

    std::vector<int> component(tris.size(), -1);
    int n_components = 0;
    for (std::uint32_t seed = 0; seed < tris.size(); ++seed) {
        if (component[seed] >= 0) continue;
        std::queue<std::uint32_t> queue;
        queue.push(seed);
        component[seed] = n_components;
        std::vector<std::uint32_t> members;
        while (!queue.empty()) {
            const std::uint32_t t = queue.front();
            queue.pop();
            members.push_back(t);
            for (int i = 0; i < 3; ++i) {
                const std::uint32_t a = tris[t][i];
                const std::uint32_t b = tris[t][(i + 1) % 3];
                for (std::uint32_t n : edge_tris[edge_key(a, b)]) {
                    if (n == t) continue;
                    // A consistently oriented neighbour walks the edge b -> a.
                    const bool consistent = has_directed_edge(tris[n], b, a);
                    if (component[n] < 0) {
                        if (!consistent) flip(tris[n]);
                        component[n] = n_components;
                        queue.push(n);
                    } else if (!consistent) {
                        throw DataError("non-orientable surface");
                    }
                }
            }
        }
        double volume = 0.0;
        for (std::uint32_t t : members) volume += tri_signed_volume(v[tris[t][0]], v[tris[t][1]], v[tris[t][2]]);
        if (volume < 0.0)
            for (std::uint32_t t : members) flip(tris[t]);
        ++n_components;
    }
}

}  // namespace

TriMesh::TriMesh(std::vector<Vec3> vertices, std::vector<Tri> triangles, bool strict)
    : vertices_(std::move(vertices)) {
    if (triangles.empty()) throw DataError("empty mesh");
    for (const Vec3& p : vertices_)
        if (!p.allFinite()) throw DataError("non-finite vertex coordinate");

    triangles_.reserve(triangles.size());
    std::size_t dropped = 0;
    for (std::size_t t = 0; t < triangles.size(); ++t) {
        const Tri& tri = triangles[t];
        for (std::uint32_t idx : tri)
            if (idx >= vertices_.size())
                throw DataError("triangle " + std::to_string(t) + " references vertex " + std::to_string(idx) +
                                " out of range");
        const Vec3 cross =
            (vertices_[tri[1]] - vertices_[tri[0]]).cross(vertices_[tri[2]] - vertices_[tri[0]]);
        if (0.5 * cross.norm() <= kDegenerateArea || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
            if (strict) throw DataError("degenerate triangle " + std::to_string(t));
            ++dropped;
            continue;
        }
        triangles_.push_back(tri);
    }
    if (dropped > 0) warn("dropped " + std::to_string(dropped) + " degenerate triangles");
    if (triangles_.empty()) throw DataError("empty mesh");

    orient(vertices_, triangles_, strict);

    normals_.resize(triangles_.size());
    areas_.resize(triangles_.size());
    Vec3 weighted = Vec3::Zero();
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        const auto [a, b, c] = corners(t);
        const Vec3 cross = (b - a).cross(c - a);
        const double norm = cross.norm();
        areas_[t] = 0.5 * norm;
        normals_[t] = cross / norm;
        total_area_ += areas_[t];
        signed_volume_ += tri_signed_volume(a, b, c);
        weighted += areas_[t] * (a + b + c) / 3.0;
    }
    centroid_ = weighted / total_area_;
    for (const Tri& tri : triangles_)
        for (std::uint32_t idx : tri)
            bounding_radius_ = std::max(bounding_radius_, (vertices_[idx] - centroid_).norm());
}

Vec3 TriMesh::triangle_centroid(std::size_t t) const {
    const auto [a, b, c] = corners(t);
    return (a + b + c) / 3.0;
}

std::array<Vec3, 3> TriMesh::corners(std::size_t t) const {
    const Tri& tri = triangles_[t];
    return {vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]};
}

Vec3 TriMesh::point_on(std::size_t t, double b1, double b2) const {
    const auto [a, b, c] = corners(t);
    return a + b1 * (b - a) + b2 * (c - a);
}

double TriMesh::aspect_quality(std::size_t t) const {
    const auto [a, b, c] = corners(t);
    const double sum_sq = (b - a).squaredNorm() + (c - b).squaredNorm() + (a - c).squaredNorm();
    return 4.0 * std::sqrt(3.0) * areas_[t] / sum_sq;
}

double TriMesh::min_aspect_quality() const {
    double q = 1.0;
    for (std::size_t t = 0; t < triangles_.size(); ++t) q = std::min(q, aspect_quality(t));
    return q;
}

TriMesh load_mesh(const std::filesystem::path& path, LoadOptions options) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open mesh file " + path.string());
    std::vector<Vec3> vertices;
    std::vector<Tri> triangles;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            Vec3 p;
            if (!(ls >> p.x() >> p.y() >> p.z()))
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed vertex");
            vertices.push_back(p);
        } else if (tag == "f") {
            long long i, j, k;
            if (!(ls >> i >> j >> k) || i < 1 || j < 1 || k < 1)
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed face");
            triangles.push_back({static_cast<std::uint32_t>(i - 1), static_cast<std::uint32_t>(j - 1),
                                 static_cast<std::uint32_t>(k - 1)});
        } else {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": unknown record '" + tag + "'");
        }
    }
    return TriMesh(std::move(vertices), std::move(triangles), options.strict);
}

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write mesh file " + path.string());
    out.precision(17);
    for (const Vec3& p : mesh.vertices()) out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    for (const Tri& t : mesh.triangles()) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

double SphericalCoord::theta_normalized() const { return (theta + std::numbers::pi) / (2.0 * std::numbers::pi); }
double SphericalCoord::phi_normalized() const { return phi / std::numbers::pi; }
double SphericalCoord::r_normalized(double r_min, double r_max) const { return (r - r_min) / (r_max - r_min); }

SphericalCoord to_spherical(const Vec3& x, const Vec3& origin) {
    const Vec3 d = x - origin;
    const double r = d.norm();
    if (!(r > 0.0)) throw UsageError("direction undefined: point coincides with origin");
    const double cos_phi = std::clamp(d.z() / r, -1.0, 1.0);
    return {std::atan2(d.y(), d.x()), std::acos(cos_phi), r};
}

Vec3 from_spherical(const SphericalCoord& s, const Vec3& origin) {
    const double sp = std::sin(s.phi);
    return origin + s.r * Vec3(sp * std::cos(s.theta), sp * std::sin(s.theta), std::cos(s.phi));
}

TriMesh apply_scale(const TriMesh& mesh, double s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw UsageError("scale factor must be positive");
    std::vector<Vec3> v = mesh.vertices();
    const Vec3 c = mesh.centroid();
    for (Vec3& p : v) p = c + s * (p - c);
    return TriMesh(std::move(v), mesh.triangles());
}

TriMesh translate(const TriMesh& mesh, const Vec3& offset) {
    std::vector<Vec3> v = mesh.vertices();
    for (Vec3& p : v) p += offset;
    return TriMesh(std::move(v), mesh.triangles());
}

TriMesh degrade_mesh(const TriMesh& mesh, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw UsageError("degrade fraction must lie in [0, 1]");
    if (fraction == 0.0) return mesh;

    std::vector<Vec3> v = mesh.vertices();
    std::vector<Tri> tris = mesh.triangles();

    // Undirected edges in deterministic order, each with its two triangles.
    std::map<std::uint64_t, std::vector<std::uint32_t>> edge_tris;
    for (std::uint32_t t = 0; t < tris.size(); ++t)
        for (int i = 0; i < 3; ++i) edge_tris[edge_key(tris[t][i], tris[t][(i + 1) % 3])].push_back(t);
    std::vector<std::pair<std::uint64_t, std::array<std::uint32_t, 2>>> edges;
    for (const auto& [key, list] : edge_tris)
        if (list.size() == 2) edges.push_back({key, {list[0], list[1]}});

    Rng rng(seed);
    for (std::size_t i = edges.size(); i > 1; --i) std::swap(edges[i - 1], edges[rng.index(i)]);

    const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(tris.size())));
    std::vector<char> split(tris.size(), 0);
    std::vector<Tri> extra;
    std::size_t n_split = 0;
    for (const auto& [key, pair] : edges) {
        if (n_split >= target) break;
        if (split[pair[0]] || split[pair[1]]) continue;
        auto a = static_cast<std::uint32_t>(key >> 32);
        auto b = static_cast<std::uint32_t>(key & 0xffffffffu);
        if (rng.uniform() < 0.5) std::swap(a, b);
        // Split point close to endpoint a: leaves a thin sliver next to a.
        const double t = rng.uniform(0.01, 0.03);
        const auto m = static_cast<std::uint32_t>(v.size());
        v.push_back(v[a] + t * (v[b] - v[a]));
        for (std::uint32_t tri_index : pair) {
            Tri tri = tris[tri_index];
            // Rotate so the split edge is (tri[0], tri[1]) in winding order.
            while (!((tri[0] == a && tri[1] == b) || (tri[0] == b && tri[1] == a)))
                std::rotate(tri.begin(), tri.begin() + 1, tri.end());
            tris[tri_index] = {tri[0], m, tri[2]};
            extra.push_back({m, tri[1], tri[2]});
            split[tri_index] = 1;
        }
        n_split += 2;
    }
    tris.insert(tris.end(), extra.begin(), extra.end());
    return TriMesh(std::move(v), std::move(tris));
}

TriMesh merge(std::span<const TriMesh> parts) {
    std::vector<Vec3> v;
    std::vector<Tri> tris;
    for (const TriMesh& part : parts) {
        const auto base = static_cast<std::uint32_t>(v.size());
        v.insert(v.end(), part.vertices().begin(), part.vertices().end());
        for (Tri t : part.triangles()) tris.push_back({t[0] + base, t[1] + base, t[2] + base});
    }
    return TriMesh(std::move(v), std::move(tris));
}

TriMesh make_icosphere(int subdivisions, double radius, const Vec3& center) {
    if (subdivisions < 0) throw UsageError("icosphere subdivisions must be >= 0");
    const double g = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, g, 0}, {1, g, 0}, {-1, -g, 0}, {1, -g, 0}, {0, -1, g}, {0, 1, g},
                           {0, -1, -g}, {0, 1, -g}, {g, 0, -1}, {g, 0, 1}, {-g, 0, -1}, {-g, 0, 1}};
    for (Vec3& p : v) p.normalize();
    std::vector<Tri> tris = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                             {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (int level = 0; level < subdivisions; ++level) {
        std::unordered_map<std::uint64_t, std::uint32_t> midpoint;
        auto mid = [&](std::uint32_t a, std::uint32_t b) {
            const std::uint64_t key = edge_key(a, b);
            if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
            const auto idx = static_cast<std::uint32_t>(v.size());
            v.push_back((v[a] + v[b]).normalized());
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<Tri> next;
        next.reserve(tris.size() * 4);
        for (const Tri& t : tris) {
            const std::uint32_t ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        tris = std::move(next);
    }
    for (Vec3& p : v) p = center + radius * p;
    return TriMesh(std::move(v), std::move(tris));
}

TriMesh make_box(const Vec3& lo, const Vec3& hi) {
    std::vector<Vec3> v;
    for (int i = 0; i < 8; ++i)
        v.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
    std::vector<Tri> tris = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                             {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
    return TriMesh(std::move(v), std::move(tris));
}

TriMesh make_lathe(std::span<const std::array<double, 2>> profile, int segments, double max_edge, const Vec3& base) {
    if (profile.size() < 3 || segments < 3 || !(max_edge > 0.0)) throw UsageError("invalid lathe profile");
    if (profile.front()[0] != 0.0 || profile.back()[0] != 0.0)
        throw UsageError("lathe profile must start and end on the axis");

    // Refine the profile polyline.
    std::vector<std::array<double, 2>> pts{profile.front()};
    for (std::size_t i = 1; i < profile.size(); ++i) {
        const auto& p = profile[i - 1];
        const auto& q = profile[i];
        const double len = std::hypot(q[0] - p[0], q[1] - p[1]);
        const int pieces = std::max(1, static_cast<int>(std::ceil(len / max_edge)));
        for (int s = 1; s <= pieces; ++s) {
            const double t = static_cast<double>(s) / pieces;
            pts.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])});
        }
    }

    std::vector<Vec3> v;
    std::vector<std::uint32_t> ring_start(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        ring_start[i] = static_cast<std::uint32_t>(v.size());
        const bool on_axis = (i == 0 || i + 1 == pts.size());
        if (on_axis) {
            v.push_back(base + Vec3(0.0, pts[i][1], 0.0));
            continue;
        }
        for (int j = 0; j < segments; ++j) {
            const double a = 2.0 * std::numbers::pi * j / segments;
            v.push_back(base + Vec3(pts[i][0] * std::cos(a), pts[i][1], pts[i][0] * std::sin(a)));
        }
    }
    auto ring = [&](std::size_t i, int j) {
        const bool on_axis = (i == 0 || i + 1 == pts.size());
        return on_axis ? ring_start[i] : ring_start[i] + static_cast<std::uint32_t>(j % segments);
    };
    std::vector<Tri> tris;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        for (int j = 0; j < segments; ++j) {
            const std::uint32_t a = ring(i, j), b = ring(i, j + 1), c = ring(i + 1, j), d = ring(i + 1, j + 1);
            if (a != b) tris.push_back({a, b, c});
            if (c != d) tris.push_back({b, d, c});
        }
    }
    return TriMesh(std::move(v), std::move(tris));
}

}  // namespace sonofield

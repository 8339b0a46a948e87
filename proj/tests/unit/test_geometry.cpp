#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "helpers.hpp"
#include "sonofield/error.hpp"
#include "sonofield/geometry.hpp"
#include "sonofield/rng.hpp"

using namespace sonofield;

namespace {

TriMesh unit_cube() { return make_box(Vec3(0, 0, 0), Vec3(1, 1, 1)); }

bool same_mesh(const TriMesh& a, const TriMesh& b) {
    if (a.triangles() != b.triangles() || a.vertices().size() != b.vertices().size()) return false;
    for (std::size_t i = 0; i < a.vertices().size(); ++i)
        if (a.vertices()[i] != b.vertices()[i]) return false;
    return true;
}

void check_invariants(const TriMesh& m) {
    double sum = 0.0;
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
        CHECK(m.areas()[t] > 0.0);
        CHECK(std::abs(m.normals()[t].norm() - 1.0) < 1e-9);
        for (auto idx : m.triangles()[t]) CHECK(idx < m.vertices().size());
        sum += m.areas()[t];
    }
    CHECK(std::abs(sum - m.total_area()) <= 1e-9 * m.total_area());
    CHECK(m.signed_volume() > 0.0);
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("icosphere area and invariants") {
    const TriMesh s = make_icosphere(4);
    CHECK(s.num_triangles() == 5120);
    CHECK(std::abs(s.total_area() - 4 * std::numbers::pi) < 0.01 * 4 * std::numbers::pi);
    check_invariants(s);
}

TEST_CASE("unit cube area is exactly 6") {
    const TriMesh c = unit_cube();
    CHECK(c.num_triangles() == 12);
    CHECK(c.total_area() == 6.0);
    check_invariants(c);
}

TEST_CASE("load_mesh round trip and errors") {
    const auto dir = scratch_dir("geom");
    const TriMesh c = unit_cube();
    save_mesh(c, dir / "cube.txt");
    const TriMesh back = load_mesh(dir / "cube.txt");
    CHECK(back.num_triangles() == 12);
    CHECK(back.total_area() == doctest::Approx(6.0).epsilon(1e-12));

    {
        std::ofstream f(dir / "degenerate.txt");
        f << "# cube plus a sliver\n";
        for (const Vec3& v : c.vertices()) f << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
        for (const Tri& t : c.triangles()) f << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
        f << "f 1 1 2\n";
    }
    CHECK_THROWS_WITH_AS(load_mesh(dir / "degenerate.txt", {.strict = true}), doctest::Contains("degenerate triangle"),
                         DataError);
    CHECK(load_mesh(dir / "degenerate.txt").num_triangles() == 12);

    {
        std::ofstream f(dir / "bad.txt");
        f << "v 0 0 0\nv 1 0 0\nf 1 2 x\n";
    }
    CHECK_THROWS_AS(load_mesh(dir / "bad.txt"), DataError);
    {
        std::ofstream f(dir / "empty.txt");
        f << "# nothing\n";
    }
    CHECK_THROWS_WITH_AS(load_mesh(dir / "empty.txt"), doctest::Contains("empty"), DataError);
    CHECK_THROWS_AS(load_mesh(dir / "missing.txt"), DataError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("inverted winding is flipped outward") {
    const TriMesh c = unit_cube();
    std::vector<Tri> flipped = c.triangles();
    for (Tri& t : flipped) std::swap(t[1], t[2]);
    const TriMesh f(c.vertices(), flipped);
    CHECK(f.signed_volume() > 0.0);
    for (std::size_t t = 0; t < f.num_triangles(); ++t)
        CHECK((f.normals()[t] - c.normals()[t]).norm() < 1e-12);
}

TEST_CASE("to_spherical examples") {
    SphericalCoord s = to_spherical(Vec3(0, 0, 1));
    CHECK(s.phi == doctest::Approx(0.0));
    CHECK(s.r == doctest::Approx(1.0));
    s = to_spherical(Vec3(1, 0, 0));
    CHECK(s.theta == doctest::Approx(0.0));
    CHECK(s.phi == doctest::Approx(std::numbers::pi / 2));
    CHECK(s.r == doctest::Approx(1.0));
    s = to_spherical(Vec3(0, 2, 0));
    CHECK(s.theta == doctest::Approx(std::numbers::pi / 2));
    CHECK(s.phi == doctest::Approx(std::numbers::pi / 2));
    CHECK(s.r == doctest::Approx(2.0));
    CHECK_THROWS_AS(to_spherical(Vec3(1, 2, 3), Vec3(1, 2, 3)), UsageError);
}

TEST_CASE("spherical round trip on 1e5 random points") {
    Rng rng(11);
    double worst = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const Vec3 origin(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const Vec3 x(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
        const SphericalCoord s = to_spherical(x, origin);
        CHECK_FALSE((s.theta < -std::numbers::pi || s.theta > std::numbers::pi));
        CHECK_FALSE((s.phi < 0 || s.phi > std::numbers::pi));
        CHECK_FALSE((s.theta_normalized() < 0 || s.theta_normalized() > 1));
        CHECK_FALSE((s.phi_normalized() < 0 || s.phi_normalized() > 1));
        worst = std::max(worst, (from_spherical(s, origin) - x).norm() / std::max(1.0, x.norm()));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("normalization endpoints") {
    CHECK(SphericalCoord{-std::numbers::pi, 0, 1}.theta_normalized() == 0.0);
    CHECK(SphericalCoord{std::numbers::pi, std::numbers::pi, 1}.theta_normalized() == 1.0);
    CHECK(SphericalCoord{0, std::numbers::pi, 1}.phi_normalized() == 1.0);
    CHECK(SphericalCoord{0, 0, 3}.r_normalized(2, 4) == doctest::Approx(0.5));
}

TEST_CASE("apply_scale") {
    const TriMesh c = unit_cube();
    CHECK(same_mesh(apply_scale(c, 1.0), c));
    const TriMesh c2 = apply_scale(c, 2.0);
    CHECK(c2.total_area() == doctest::Approx(24.0).epsilon(1e-12));
    for (std::size_t t = 0; t < c.num_triangles(); ++t) CHECK((c2.normals()[t] - c.normals()[t]).norm() < 1e-12);
    CHECK((c2.centroid() - c.centroid()).norm() < 1e-12);
    CHECK_THROWS_AS(apply_scale(c, 0.0), UsageError);
    CHECK_THROWS_AS(apply_scale(c, -1.0), UsageError);
    const TriMesh s = make_icosphere(2);
    for (double k : {0.3, 1.7, 5.0})
        CHECK(apply_scale(s, k).total_area() == doctest::Approx(k * k * s.total_area()).epsilon(1e-12));
}

TEST_CASE("degrade_mesh") {
    const TriMesh s = make_icosphere(3);
    CHECK(same_mesh(degrade_mesh(s, 0.0, 1), s));
    const TriMesh d = degrade_mesh(s, 0.5, 1);
    CHECK(d.num_triangles() > s.num_triangles());
    CHECK(d.min_aspect_quality() < 0.05);
    CHECK(std::abs(d.total_area() - s.total_area()) <= 1e-6 * s.total_area());
    check_invariants(d);
    CHECK(same_mesh(degrade_mesh(s, 0.5, 1), d));
    CHECK_FALSE(same_mesh(degrade_mesh(s, 0.5, 2), d));
    CHECK_THROWS_AS(degrade_mesh(s, 1.5, 1), UsageError);
}

TEST_CASE("lathe surfaces are closed and outward") {
    const std::array<std::array<double, 2>, 4> profile{{{0.0, 0.0}, {0.5, 0.0}, {0.5, 1.0}, {0.0, 1.0}}};
    const TriMesh cyl = make_lathe(profile, 64, 0.05);
    check_invariants(cyl);
    const double exact = 2 * std::numbers::pi * 0.5 * 1.0 + 2 * std::numbers::pi * 0.25;
    CHECK(cyl.total_area() == doctest::Approx(exact).epsilon(0.01));
    CHECK(cyl.signed_volume() == doctest::Approx(std::numbers::pi * 0.25).epsilon(0.01));
}

}  // TEST_SUITE

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sonofield/error.hpp"
#include "sonofield/kernel.hpp"
#include "sonofield/rng.hpp"

using namespace sonofield;

namespace {

Vec3 random_unit(Rng& rng) {
    const double z = rng.uniform(-1, 1), t = rng.uniform(0, 2 * std::numbers::pi);
    const double s = std::sqrt(1 - z * z);
    return {s * std::cos(t), s * std::sin(t), z};
}

}  // namespace

TEST_SUITE("kernel") {

TEST_CASE("green examples") {
    const Complex g1 = green(Vec3(0, 0, 0), Vec3(1, 0, 0), 0.0);
    CHECK(g1.real() == doctest::Approx(0.0795775).epsilon(1e-6));
    CHECK(g1.imag() == 0.0);
    const Complex g2 = green(Vec3(0, 0, 0), Vec3(0, 0.5, 0), 2 * std::numbers::pi);
    CHECK(g2.real() == doctest::Approx(-1.0 / (2 * std::numbers::pi)).epsilon(1e-12));
    CHECK(std::abs(g2.imag()) < 1e-15);
    CHECK_THROWS_AS(green(Vec3(1, 2, 3), Vec3(1, 2, 3), 1.0), NumericError);
}

TEST_CASE("green_dn_y examples") {
    CHECK(green_dn_y(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 0, 0), 0.0).real() ==
          doctest::Approx(-0.0795775).epsilon(1e-6));
    const Complex perp = green_dn_y(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), 3.0);
    CHECK(perp == Complex(0.0, 0.0));
    CHECK_THROWS_AS(green_dn_y(Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(0, 1, 0), 1.0), NumericError);
}

TEST_CASE("green_dn_y equals directional finite differences of green") {
    Rng rng(21);
    for (int trial = 0; trial < 2000; ++trial) {
        const double r = std::exp(rng.uniform(std::log(0.1), std::log(10.0)));
        const double k = trial % 4 == 0 ? 0.0 : rng.uniform(0.0, 50.0);
        const Vec3 x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const Vec3 y = x + r * random_unit(rng);
        const Vec3 n = random_unit(rng);
        // Step small against both r and the wavelength.
        const double h = 1e-5 * std::min(r, 1.0 / std::max(k, 1.0));
        const Complex fd = (green(x, y + h * n, k) - green(x, y - h * n, k)) / (2 * h);
        const Complex an = green_dn_y(x, y, n, k);
        const double scale = (1.0 + k * r) / (4 * std::numbers::pi * r * r);
        CHECK(std::abs(fd - an) <= 1e-6 * scale);
    }
}

TEST_CASE("reciprocity and modulus") {
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        const Vec3 x(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
        const Vec3 y(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
        const double k = rng.uniform(0, 30);
        const Complex a = green(x, y, k), b = green(y, x, k);
        CHECK(a == b);
        const double r = (x - y).norm();
        CHECK(std::abs(std::abs(a) - 1.0 / (4 * std::numbers::pi * r)) <= 1e-12 / r);
    }
}

TEST_CASE("wavenumber") {
    CHECK(Wavenumber::from_frequency(343.0).value() == doctest::Approx(2 * std::numbers::pi));
    CHECK(Wavenumber(2.0).frequency() == doctest::Approx(343.0 / std::numbers::pi));
    CHECK_THROWS_AS(Wavenumber(-1.0), UsageError);
    CHECK_THROWS_AS(Wavenumber(std::nan("")), UsageError);
}

}  // TEST_SUITE

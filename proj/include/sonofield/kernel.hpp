#pragma once

#include <cmath>
#include <complex>
#include <numbers>

#include "sonofield/error.hpp"
#include "sonofield/geometry.hpp"

namespace sonofield {

using Complex = std::complex<double>;

/// Speed of sound in air at 20 degrees C (m/s).
inline constexpr double kSpeedOfSound = 343.0;

/// Acoustic wavenumber k = 2 pi f / c in 1/m.
class Wavenumber {
public:
    explicit Wavenumber(double k) : k_(k) {
        if (!(k >= 0.0) || !std::isfinite(k)) throw UsageError("wavenumber must be finite and >= 0");
    }
    static Wavenumber from_frequency(double hz, double c = kSpeedOfSound) {
        return Wavenumber(2.0 * std::numbers::pi * hz / c);
    }
    [[nodiscard]] double value() const { return k_; }
    [[nodiscard]] double frequency(double c = kSpeedOfSound) const { return k_ * c / (2.0 * std::numbers::pi); }

private:
    double k_;
};

inline constexpr double kSingularDistance = 1e-12;

namespace detail {
inline double checked_distance(const Vec3& x, const Vec3& y) {
    const double r = (x - y).norm();
    if (r < kSingularDistance) throw NumericError("Green's function evaluated at coincident points");
    return r;
}
}  // namespace detail

/// Free-space Helmholtz Green's function e^{ikr} / (4 pi r), outgoing
/// convention.
inline Complex green(const Vec3& x, const Vec3& y, double k) {
    const double r = detail::checked_distance(x, y);
    return std::polar(1.0 / (4.0 * std::numbers::pi * r), k * r);
}

/// Normal derivative of green(x, y) with respect to y along n_y:
/// -e^{ikr} / (4 pi r^2) (1 - ikr) dr/dn_y with dr/dn_y = (y - x) . n_y / r.
inline Complex green_dn_y(const Vec3& x, const Vec3& y, const Vec3& n_y, double k) {
    const Vec3 d = y - x;
    const double r = detail::checked_distance(x, y);
    const double dr_dn = d.dot(n_y) / r;
    const Complex e = std::polar(1.0, k * r);
    return -e / (4.0 * std::numbers::pi * r * r) * Complex(1.0, -k * r) * dr_dn;
}

}  // namespace sonofield

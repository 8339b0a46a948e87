#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "sonofield/geometry.hpp"
#include "sonofield/mc_bem.hpp"
#include "sonofield/scenes.hpp"

namespace sonofield {

/// Far-field transfer magnitudes on a sphere of radius `radius`.
/// Pixel (u, v) sits at theta_u = -pi + (u + 0.5) 2pi / W, phi_v = (v + 0.5) pi / H
/// and is stored at values[v * W + u].
struct FfatMap {
    int width = 0;
    int height = 0;
    double radius = 0.0;
    double frequency = 0.0;
    Vec3 origin = Vec3::Zero();
    int mode = -1;  // -1 when the map is not tied to a mode
    std::vector<double> values;

    static double theta_at(int u, int width);
    static double phi_at(int v, int height);

    [[nodiscard]] double at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }
    [[nodiscard]] std::size_t size() const { return values.size(); }
    /// Throws DataError on bad shape or negative / non-finite values.
    void validate() const;
};

/// Cartesian pixel centers of a W x H map, ordered like FfatMap::values.
std::vector<Vec3> map_points(const Vec3& origin, double radius, int width, int height);

/// Batched |p| evaluation.
using MagnitudeEvaluator = std::function<std::vector<double>(std::span<const Vec3>)>;

MagnitudeEvaluator field_evaluator(const SolvedBoundaryField& field);
MagnitudeEvaluator oracle_evaluator(const OracleSpec& oracle, double k);

struct MapFrame {
    Vec3 origin = Vec3::Zero();
    double reference_radius = 1.0;  // maps must lie at r >= 1.5 * reference_radius
};

FfatMap make_ffat_map(const MagnitudeEvaluator& eval, const MapFrame& frame, double radius, int width = 64,
                      int height = 32, double frequency = 0.0);

/// |p|(theta, phi, r) ~ sum_i coefficients[i - 1](theta, phi) / r^i.
struct FfatExpansion {
    int width = 0;
    int height = 0;
    Vec3 origin = Vec3::Zero();
    std::vector<std::vector<double>> coefficients;
    double relative_residual = 0.0;  // ||fit - data|| / ||data|| over all maps

    [[nodiscard]] std::size_t terms() const { return coefficients.size(); }
    [[nodiscard]] double magnitude(int u, int v, double r) const;
};

/// Per-pixel least squares over maps of equal shape at distinct radii.
FfatExpansion fit_ffat_expansion(std::span<const FfatMap> maps, int terms);

/// 10 log10(sum ref^2 / sum (ref - test)^2); +inf for identical maps.
double snr(const FfatMap& reference, const FfatMap& test);

/// Mean local SSIM (11x11 Gaussian window, sigma 1.5, C1 = 1e-4, C2 = 9e-4)
/// after dividing both maps by the reference maximum. Only windows that fit
/// entirely inside the map are averaged; maps narrower than the window use
/// per-pixel windows clipped to the map.
double ssim(const FfatMap& reference, const FfatMap& test);

/// ASCII: "FFAT W H r f" header, then H lines of W values.
void save_ffat(const FfatMap& map, const std::filesystem::path& path);
FfatMap load_ffat(const std::filesystem::path& path);
/// 8-bit binary PGM scaled to the map maximum, row v = 0 on top.
void write_pgm(const FfatMap& map, const std::filesystem::path& path);

}  // namespace sonofield

#include "sonofield/ffat.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/QR>

#include "sonofield/error.hpp"

namespace sonofield {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMinShell = 1.5;

constexpr int kSsimRadius = 5;
constexpr double kSsimSigma = 1.5;
constexpr double kC1 = 1e-4;
constexpr double kC2 = 9e-4;

void require_same_shape(const FfatMap& a, const FfatMap& b) {
    if (a.width != b.width || a.height != b.height || a.size() != b.size())
        throw UsageError("map shapes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                         std::to_string(b.width) + "x" + std::to_string(b.height));
}

std::array<double, 2 * kSsimRadius + 1> gaussian_taps() {
    std::array<double, 2 * kSsimRadius + 1> w{};
    double sum = 0.0;
    for (int i = -kSsimRadius; i <= kSsimRadius; ++i) {
        w[i + kSsimRadius] = std::exp(-0.5 * i * i / (kSsimSigma * kSsimSigma));
        sum += w[i + kSsimRadius];
    }
    for (double& x : w) x /= sum;
    return w;
}

double local_ssim(const std::vector<double>& a, const std::vector<double>& b, int width, int height, int cu, int cv,
                  const std::array<double, 2 * kSsimRadius + 1>& taps) {
    double wsum = 0.0, ma = 0.0, mb = 0.0, maa = 0.0, mbb = 0.0, mab = 0.0;
    for (int dv = -kSsimRadius; dv <= kSsimRadius; ++dv) {
        const int v = cv + dv;
        if (v < 0 || v >= height) continue;
        for (int du = -kSsimRadius; du <= kSsimRadius; ++du) {
            const int u = cu + du;
            if (u < 0 || u >= width) continue;
            const double w = taps[dv + kSsimRadius] * taps[du + kSsimRadius];
            const std::size_t i = static_cast<std::size_t>(v) * width + u;
            wsum += w;
            ma += w * a[i];
            mb += w * b[i];
            maa += w * a[i] * a[i];
            mbb += w * b[i] * b[i];
            mab += w * a[i] * b[i];
        }
    }
    ma /= wsum;
    mb /= wsum;
    const double va = maa / wsum - ma * ma;
    const double vb = mbb / wsum - mb * mb;
    const double cov = mab / wsum - ma * mb;
    return ((2 * ma * mb + kC1) * (2 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
}

}  // namespace

double FfatMap::theta_at(int u, int width) { return -kPi + (u + 0.5) * 2.0 * kPi / width; }
double FfatMap::phi_at(int v, int height) { return (v + 0.5) * kPi / height; }

void FfatMap::validate() const {
    if (width < 2 || height < 2) throw DataError("FFAT map must be at least 2x2");
    if (values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
        throw DataError("FFAT map holds " + std::to_string(values.size()) + " values for " + std::to_string(width) +
                        "x" + std::to_string(height));
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!(values[i] >= 0.0) || !std::isfinite(values[i]))
            throw DataError("FFAT map value " + std::to_string(i) + " is negative or non-finite");
}

std::vector<Vec3> map_points(const Vec3& origin, double radius, int width, int height) {
    if (width < 2 || height < 2) throw UsageError("FFAT map must be at least 2x2");
    std::vector<Vec3> pts;
    pts.reserve(static_cast<std::size_t>(width) * height);
    for (int v = 0; v < height; ++v)
        for (int u = 0; u < width; ++u)
            pts.push_back(from_spherical({FfatMap::theta_at(u, width), FfatMap::phi_at(v, height), radius}, origin));
    return pts;
}

MagnitudeEvaluator field_evaluator(const SolvedBoundaryField& field) {
    return [&field](std::span<const Vec3> xs) {
        const std::vector<Complex> p = eval_exterior(field, xs);
        std::vector<double> mag(p.size());
        std::transform(p.begin(), p.end(), mag.begin(), [](Complex c) { return std::abs(c); });
        return mag;
    };
}

MagnitudeEvaluator oracle_evaluator(const OracleSpec& oracle, double k) {
    return [oracle, k](std::span<const Vec3> xs) {
        std::vector<double> mag(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) mag[i] = std::abs(analytic_field(oracle, xs[i], k));
        return mag;
    };
}

FfatMap make_ffat_map(const MagnitudeEvaluator& eval, const MapFrame& frame, double radius, int width, int height,
                      double frequency) {
    if (!(radius >= kMinShell * frame.reference_radius * (1.0 - 1e-12)))
        throw UsageError("map radius " + std::to_string(radius) + " is inside the listener shell (minimum " +
                         std::to_string(kMinShell * frame.reference_radius) + ")");
    FfatMap map;
    map.width = width;
    map.height = height;
    map.radius = radius;
    map.frequency = frequency;
    map.origin = frame.origin;
    const std::vector<Vec3> pts = map_points(frame.origin, radius, width, height);
    map.values = eval(pts);
    if (map.values.size() != pts.size()) throw DataError("evaluator returned the wrong number of values");
    for (double& x : map.values)
        if (!std::isfinite(x)) throw NumericError("non-finite value in FFAT map");
    return map;
}

double FfatExpansion::magnitude(int u, int v, double r) const {
    const std::size_t i = static_cast<std::size_t>(v) * width + u;
    double sum = 0.0, inv = 1.0;
    for (const auto& c : coefficients) {
        inv /= r;
        sum += c[i] * inv;
    }
    return sum;
}

FfatExpansion fit_ffat_expansion(std::span<const FfatMap> maps, int terms) {
    if (terms < 1) throw UsageError("expansion needs at least one term");
    if (maps.size() < static_cast<std::size_t>(terms))
        throw UsageError("need at least as many radii as expansion terms");
    for (const FfatMap& m : maps) require_same_shape(maps.front(), m);
    const auto rows = static_cast<Eigen::Index>(maps.size());
    Eigen::MatrixXd basis(rows, terms);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double r = maps[static_cast<std::size_t>(i)].radius;
        if (!(r > 0.0)) throw UsageError("map radius must be positive");
        double inv = 1.0;
        for (int j = 0; j < terms; ++j) basis(i, j) = (inv /= r);
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
    if (qr.rank() < terms) throw UsageError("rank-deficient radial basis (duplicate radii?)");

    const std::size_t pixels = maps.front().size();
    Eigen::MatrixXd data(rows, static_cast<Eigen::Index>(pixels));
    for (Eigen::Index i = 0; i < rows; ++i)
        data.row(i) = Eigen::Map<const Eigen::RowVectorXd>(maps[static_cast<std::size_t>(i)].values.data(),
                                                           static_cast<Eigen::Index>(pixels));
    const Eigen::MatrixXd coef = qr.solve(data);

    FfatExpansion ex;
    ex.width = maps.front().width;
    ex.height = maps.front().height;
    ex.origin = maps.front().origin;
    ex.coefficients.resize(static_cast<std::size_t>(terms));
    for (int j = 0; j < terms; ++j) ex.coefficients[j].assign(coef.row(j).begin(), coef.row(j).end());
    const double norm = data.norm();
    ex.relative_residual = norm > 0.0 ? (basis * coef - data).norm() / norm : 0.0;
    return ex;
}

double snr(const FfatMap& reference, const FfatMap& test) {
    require_same_shape(reference, test);
    double sig = 0.0, err = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        sig += reference.values[i] * reference.values[i];
        const double d = reference.values[i] - test.values[i];
        err += d * d;
    }
    if (sig == 0.0) throw DataError("SNR undefined for an all-zero reference map");
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(sig / err);
}

double ssim(const FfatMap& reference, const FfatMap& test) {
    require_same_shape(reference, test);
    const double peak = *std::max_element(reference.values.begin(), reference.values.end());
    if (!(peak > 0.0)) throw DataError("SSIM undefined for an all-zero reference map");
    std::vector<double> a(reference.values), b(test.values);
    for (double& x : a) x /= peak;
    for (double& x : b) x /= peak;

    const auto taps = gaussian_taps();
    const int w = reference.width, h = reference.height;
    const bool full = w > 2 * kSsimRadius && h > 2 * kSsimRadius;
    const int lo = full ? kSsimRadius : 0;
    const int hi_u = full ? w - kSsimRadius : w;
    const int hi_v = full ? h - kSsimRadius : h;
    double sum = 0.0;
    for (int v = lo; v < hi_v; ++v)
        for (int u = lo; u < hi_u; ++u) sum += local_ssim(a, b, w, h, u, v, taps);
    return sum / (static_cast<double>(hi_u - lo) * (hi_v - lo));
}

void save_ffat(const FfatMap& map, const std::filesystem::path& path) {
    map.validate();
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out.precision(17);
    out << "FFAT " << map.width << ' ' << map.height << ' ' << map.radius << ' ' << map.frequency << '\n';
    for (int v = 0; v < map.height; ++v) {
        for (int u = 0; u < map.width; ++u) out << (u ? " " : "") << map.at(u, v);
        out << '\n';
    }
    if (!out) throw DataError("failed writing " + path.string());
}

FfatMap load_ffat(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string magic;
    FfatMap map;
    if (!(in >> magic >> map.width >> map.height >> map.radius >> map.frequency) || magic != "FFAT")
        throw DataError(path.string() + ": bad FFAT header");
    if (map.width < 2 || map.height < 2 || map.width > 1 << 14 || map.height > 1 << 14)
        throw DataError(path.string() + ": invalid map size");
    map.values.resize(static_cast<std::size_t>(map.width) * map.height);
    for (std::size_t i = 0; i < map.values.size(); ++i)
        if (!(in >> map.values[i])) throw DataError(path.string() + ": truncated at value " + std::to_string(i));
    map.validate();
    return map;
}

void write_pgm(const FfatMap& map, const std::filesystem::path& path) {
    map.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "P5\n" << map.width << ' ' << map.height << "\n255\n";
    const double peak = *std::max_element(map.values.begin(), map.values.end());
    for (double x : map.values) {
        const double s = peak > 0.0 ? x / peak : 0.0;
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * s))));
    }
}

}  // namespace sonofield

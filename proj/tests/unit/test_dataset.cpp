#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "helpers.hpp"
#include "sonofield/dataset.hpp"
#include "sonofield/error.hpp"

using namespace sonofield;

namespace {

const SceneSpec kSphere{"pulsating_sphere", {{"subdivisions", 3}}, std::nullopt};

GenerateOptions opts(std::size_t configs, std::size_t points, std::uint64_t seed, std::size_t samples = 300) {
    GenerateOptions g;
    g.configs = configs;
    g.points_per_config = points;
    g.seed = seed;
    g.solver.samples = samples;
    return g;
}

// One-sample Kolmogorov-Smirnov statistic against U(0, 1).
double ks_uniform(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        d = std::max({d, static_cast<double>(i + 1) / n - xs[i], xs[i] - static_cast<double>(i) / n});
    return d;
}

void poke_float(const std::filesystem::path& p, std::size_t index, float value) {
    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(index * sizeof(float)));
    f.write(reinterpret_cast<const char*>(&value), sizeof value);
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("targets agree with the analytic field") {
    const auto dir = scratch_dir("ds1");
    const DatasetManifest m = generate_dataset(kSphere, opts(1, 10, 4, 2000), dir);
    CHECK(m.records == 10);
    CHECK(m.r_min == doctest::Approx(1.5 * m.reference_radius));
    CHECK(m.r_max == doctest::Approx(3.0 * m.reference_radius));
    for (const SampleRecord& r : read_records(dir)) {
        const SceneInstance sc = build_scene(kSphere, r.v);
        const double k = Wavenumber::from_frequency(m.denormalize_f(r.f)).value();
        const SphericalCoord s{-std::numbers::pi + 2 * std::numbers::pi * r.theta, std::numbers::pi * r.phi,
                               m.denormalize_r(r.r)};
        const double exact = std::abs(analytic_field(*sc.oracle, from_spherical(s, m.origin), k));
        CHECK(r.target[0] == doctest::Approx(exact).epsilon(0.05));
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("record counts and layout") {
    const auto dir = scratch_dir("ds2");
    const DatasetManifest m = generate_dataset(kSphere, opts(3, 5, 1), dir);
    CHECK(m.records == 15);
    CHECK(m.configs_written == 3);
    CHECK(m.configs_skipped == 0);
    CHECK(m.stride() == 6);
    CHECK(std::filesystem::file_size(dir / "records.bin") == 15 * 6 * sizeof(float));
    CHECK(m.records_hash == fnv1a_hex(dir / "records.bin"));
    const DatasetManifest back = read_manifest(dir);
    CHECK(to_json(back) == to_json(m));
    std::filesystem::remove_all(dir);
}

TEST_CASE("same seed, same bytes") {
    const auto a = scratch_dir("dsa"), b = scratch_dir("dsb"), c = scratch_dir("dsc");
    generate_dataset(kSphere, opts(2, 20, 7), a);
    generate_dataset(kSphere, opts(2, 20, 7), b);
    generate_dataset(kSphere, opts(2, 20, 8), c);
    CHECK(fnv1a_hex(a / "records.bin") == fnv1a_hex(b / "records.bin"));
    CHECK(fnv1a_hex(a / "records.bin") != fnv1a_hex(c / "records.bin"));
    for (const auto& d : {a, b, c}) std::filesystem::remove_all(d);
}

TEST_CASE("in-memory and streamed readers agree") {
    const auto dir = scratch_dir("ds3");
    generate_dataset(kSphere, opts(2, 30, 3), dir);
    const Dataset d = load_dataset(dir);
    const std::vector<SampleRecord> rs = read_records(dir);
    REQUIRE(rs.size() == d.size());
    const Dataset rebuilt = make_dataset(d.manifest, rs);
    CHECK(rebuilt.data == d.data);
    CHECK(d.record(7)[0] == static_cast<float>(rs[7].theta));
    CHECK(d.record(7)[5] == static_cast<float>(rs[7].target[0]));
    std::filesystem::remove_all(dir);
}

TEST_CASE("corrupt datasets are reported precisely") {
    const auto dir = scratch_dir("ds4");
    generate_dataset(kSphere, opts(2, 10, 3), dir);
    const auto bin = dir / "records.bin";
    const auto size = std::filesystem::file_size(bin);

    poke_float(bin, 7 * 6 + 5, std::nanf(""));
    CHECK_THROWS_WITH_AS(load_dataset(dir), doctest::Contains("non-finite value in record 7"), DataError);
    CHECK_THROWS_WITH_AS(read_records(dir), doctest::Contains("record 7"), DataError);
    poke_float(bin, 7 * 6 + 5, 1.0f);
    poke_float(bin, 3 * 6 + 2, 1.5f);
    CHECK_THROWS_WITH_AS(load_dataset(dir), doctest::Contains("record 3"), DataError);
    poke_float(bin, 3 * 6 + 2, 0.5f);
    CHECK_NOTHROW(load_dataset(dir));

    std::filesystem::resize_file(bin, size - 6);
    const std::string where = "ends at byte offset " + std::to_string(size - 6);
    CHECK_THROWS_WITH_AS(load_dataset(dir), doctest::Contains(where.c_str()), DataError);
    std::filesystem::resize_file(bin, size + 4);
    CHECK_THROWS_AS(load_dataset(dir), DataError);
    std::filesystem::resize_file(bin, size);

    nlohmann::json j;
    std::ifstream(dir / "manifest.json") >> j;
    j["format_version"] = 2;
    std::ofstream(dir / "manifest.json") << j.dump();
    CHECK_THROWS_WITH_AS(read_manifest(dir), doctest::Contains("version 2"), DataError);
    j.erase("format_version");
    std::ofstream(dir / "manifest.json") << j.dump();
    CHECK_THROWS_WITH_AS(read_manifest(dir), doctest::Contains("format_version"), DataError);
    CHECK_THROWS_AS(read_manifest(dir / "nowhere"), DataError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("listener positions are uniform in the shell volume") {
    const auto dir = scratch_dir("ds5");
    const DatasetManifest m = generate_dataset(kSphere, opts(1, 4000, 12, 100), dir);
    const double lo3 = std::pow(m.r_min, 3), hi3 = std::pow(m.r_max, 3);
    std::vector<double> ur, ut, uz;
    for (const SampleRecord& r : read_records(dir)) {
        const double radius = m.denormalize_r(r.r);
        CHECK(radius >= m.r_min);
        CHECK(radius <= m.r_max * (1 + 1e-6));
        ur.push_back((std::pow(radius, 3) - lo3) / (hi3 - lo3));
        ut.push_back(r.theta);
        uz.push_back(0.5 * (1 - std::cos(std::numbers::pi * r.phi)));
    }
    const double crit = 1.63 / std::sqrt(4000.0);  // alpha = 0.01
    CHECK(ks_uniform(ur) < crit);
    CHECK(ks_uniform(ut) < crit);
    CHECK(ks_uniform(uz) < crit);
    std::filesystem::remove_all(dir);
}

TEST_CASE("argument errors") {
    const auto dir = scratch_dir("ds6");
    CHECK_THROWS_AS(generate_dataset(kSphere, opts(0, 10, 1), dir), UsageError);
    CHECK_THROWS_AS(generate_dataset(kSphere, opts(1, 0, 1), dir), UsageError);
    DatasetManifest m;
    m.labels = {"a"};
    SampleRecord r;
    r.target = {1.0};
    CHECK_THROWS_AS(make_dataset(m, {r}), UsageError);
    std::filesystem::remove_all(dir);
}

}  // TEST_SUITE

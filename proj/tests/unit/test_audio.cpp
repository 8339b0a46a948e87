#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "field_fixture.hpp"
#include "helpers.hpp"
#include "sonofield/audio_mask.hpp"
#include "sonofield/error.hpp"
#include "sonofield/rng.hpp"

using namespace sonofield;

namespace {

constexpr int kRate = 44100;

std::vector<float> tone(double hz, std::size_t n, double amp = 0.5) {
    std::vector<float> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = static_cast<float>(amp * std::sin(2 * std::numbers::pi * hz * static_cast<double>(i) / kRate));
    return x;
}

std::vector<float> noise(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> x(n);
    for (float& s : x) s = static_cast<float>(rng.uniform(-0.5, 0.5));
    return x;
}

double error_db(const std::vector<float>& ref, const std::vector<float>& test) {
    double s = 0.0, e = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        s += double(ref[i]) * ref[i];
        e += (double(ref[i]) - test[i]) * (double(ref[i]) - test[i]);
    }
    return 10 * std::log10(e / s);
}

// Energy of x at frequency hz over the middle half of the signal.
double tone_energy(const std::vector<float>& x, double hz) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = x.size() / 4; i < 3 * x.size() / 4; ++i)
        acc += double(x[i]) * std::polar(1.0, -2 * std::numbers::pi * hz * static_cast<double>(i) / kRate);
    return std::norm(acc);
}

Trajectory still(std::size_t frames, std::size_t conditions) {
    return Trajectory(frames, {std::vector<double>(conditions, 0.4), {0.5, 1.2, 1.5}});
}

}  // namespace

TEST_SUITE("audio") {

TEST_CASE("STFT of a 440 Hz tone peaks in bin 10") {
    const Spectrogram s = stft(tone(440, kRate), kRate);
    CHECK(s.bins == 513);
    CHECK(s.frames == 1 + kRate / 512);
    const std::size_t t = s.frames / 2;
    std::size_t best = 0;
    for (std::size_t k = 1; k < s.bins; ++k)
        if (std::abs(s.at(t, k)) > std::abs(s.at(t, best))) best = k;
    CHECK(best == 10);
    CHECK(s.bin_frequency(best) == doctest::Approx(430.66).epsilon(1e-3));
}

TEST_CASE("silence stays silent") {
    const std::vector<float> z(20000, 0.0f);
    const Spectrogram s = stft(z, kRate);
    for (const auto& c : s.data) CHECK(c == std::complex<double>(0, 0));
    for (float x : istft(s)) CHECK(x == 0.0f);
}

TEST_CASE("STFT round trip of white noise") {
    const std::vector<float> x = noise(30000, 3);
    const std::vector<float> y = istft(stft(x, kRate));
    REQUIRE(y.size() == x.size());
    CHECK(error_db(x, y) <= -40.0);
}

TEST_CASE("constant masks") {
    const std::vector<float> x = noise(22050, 4);
    const Spectrogram s = stft(x, kRate);
    CHECK(error_db(x, apply_mask(s, TransferMask::constant(s.frames, 1.0f))) <= -40.0);
    for (float y : apply_mask(s, TransferMask::constant(s.frames, 0.0f))) CHECK(y == 0.0f);
    const std::vector<float> h = apply_mask(s, TransferMask::constant(s.frames, 0.5f));
    std::vector<float> half = x;
    for (float& v : half) v *= 0.5f;
    CHECK(error_db(half, h) <= -40.0);
}

TEST_CASE("half-band mask suppresses the upper tone") {
    std::vector<float> x = tone(1000, kRate);
    const std::vector<float> hi = tone(6000, kRate);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += hi[i];
    const Spectrogram s = stft(x, kRate);
    TransferMask m = TransferMask::constant(s.frames, 1.0f);
    for (std::size_t t = 0; t < m.frames; ++t)
        for (int b = 32; b < 64; ++b) m.values[t * 64 + static_cast<std::size_t>(b)] = 0.0f;
    const std::vector<float> y = apply_mask(s, m);
    const double kept = tone_energy(y, 1000), cut = tone_energy(y, 6000);
    CHECK(10 * std::log10(kept / cut) >= 30.0);
    CHECK(kept == doctest::Approx(tone_energy(x, 1000)).epsilon(0.05));
}

TEST_CASE("masking is linear in the source") {
    const std::vector<float> a = noise(15000, 1), b = tone(700, 15000);
    std::vector<float> mix(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) mix[i] = 0.3f * a[i] - 1.5f * b[i];
    const Spectrogram sm = stft(mix, kRate);
    TransferMask m = TransferMask::constant(sm.frames, 0.0f);
    Rng rng(2);
    for (float& v : m.values) v = static_cast<float>(rng.uniform(0, 2));
    for (auto mode : {MaskExpansion::nearest, MaskExpansion::linear}) {
        const std::vector<float> ya = apply_mask(stft(a, kRate), m, mode), yb = apply_mask(stft(b, kRate), m, mode);
        const std::vector<float> ym = apply_mask(sm, m, mode);
        std::vector<float> combo(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) combo[i] = 0.3f * ya[i] - 1.5f * yb[i];
        CHECK(error_db(combo, ym) <= -80.0);
    }
}

TEST_CASE("mask expansion to STFT bins") {
    const Spectrogram s = stft(noise(4096, 1), kRate);
    TransferMask m = TransferMask::constant(s.frames, 0.0f, 4, 8000.0);
    for (int b = 0; b < 4; ++b) m.values[static_cast<std::size_t>(b)] = static_cast<float>(b + 1);
    const std::vector<double> near = expand_mask_frame(m, 0, s);
    CHECK(near.size() == s.bins);
    CHECK(near[0] == 1.0);
    CHECK(near[46] == 1.0);   // 1981 Hz
    CHECK(near[47] == 2.0);   // 2024 Hz
    CHECK(near[512] == 4.0);  // above f_max holds the last bin
    const std::vector<double> lin = expand_mask_frame(m, 0, s, MaskExpansion::linear);
    const double f = s.bin_frequency(93);  // ~4005 Hz, between centres 3000 and 5000
    CHECK(lin[93] == doctest::Approx(2.0 + (f - 3000.0) / 2000.0));
    CHECK(lin[0] == 1.0);
    CHECK(lin[512] == 4.0);
}

TEST_CASE("static trajectory gives identical mask rows") {
    const NeuralTransferField f = fixture_field(1, 5);
    const TransferMask m = build_mask(f, still(12, 1), 12);
    CHECK(m.frames == 12);
    CHECK(m.values.size() == 12 * 64);
    for (std::size_t t = 1; t < 12; ++t)
        for (int b = 0; b < 64; ++b) CHECK(m.at(t, b) == m.at(0, b));
    for (float v : m.values) CHECK(v >= 0.0f);
    // Bin b equals a direct forward pass at its centre frequency.
    const std::vector<double> v{0.4};
    CHECK(m.at(0, 9) == doctest::Approx(std::max(0.0, f.forward(0.5, 1.2, 1.5, v, m.bin_center(9))[0])).epsilon(1e-6));
}

TEST_CASE("mask preconditions") {
    const NeuralTransferField f = fixture_field(1, 5);
    CHECK_THROWS_WITH_AS(build_mask(f, still(10, 1), 12), doctest::Contains("10 points"), UsageError);
    const NeuralTransferField narrow = fixture_field(1, 5, 50.0, 4000.0);
    CHECK_THROWS_AS(build_mask(narrow, still(3, 1), 3), UsageError);
    CHECK_NOTHROW(build_mask(narrow, still(3, 1), 3, 32, 4000.0));
    CHECK_THROWS_AS(build_mask(f, still(3, 1), 3, 64, 8000.0, 1), UsageError);
    CHECK_THROWS_AS(stft(std::vector<float>(100, 0.0f), kRate), UsageError);
}

TEST_CASE("trajectory CSV and resampling") {
    const auto dir = scratch_dir("traj");
    Trajectory t{{{0.0}, {3.0, 0.5, 1.2}}, {{1.0}, {-3.0, 1.5, 1.8}}};
    save_trajectory_csv(t, dir / "t.csv");
    const Trajectory back = load_trajectory_csv(dir / "t.csv", 1);
    REQUIRE(back.size() == 2);
    CHECK(back[1].v[0] == 1.0);
    CHECK(back[1].listener.theta == doctest::Approx(-3.0));
    {
        std::ofstream f(dir / "h.csv");
        f << "height,theta,phi,r\n0.5,0.1,0.2,1.5\n";
    }
    CHECK(load_trajectory_csv(dir / "h.csv", 1).size() == 1);
    {
        std::ofstream f(dir / "bad.csv");
        f << "0.5,0.1,0.2\n";
    }
    CHECK_THROWS_AS(load_trajectory_csv(dir / "bad.csv", 1), DataError);

    const Trajectory r = resample_trajectory(t, 5);
    REQUIRE(r.size() == 5);
    CHECK(r[2].v[0] == doctest::Approx(0.5));
    CHECK(r[2].listener.phi == doctest::Approx(1.0));
    CHECK(r[2].listener.r == doctest::Approx(1.5));
    // Shorter arc passes through +-pi, not zero.
    CHECK(std::abs(r[2].listener.theta) == doctest::Approx(std::numbers::pi));
    CHECK(resample_trajectory(t, 1).size() == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("WAV round trip and format errors") {
    const auto dir = scratch_dir("wav");
    Audio a{22050, tone(300, 5000, 0.9)};
    a.samples[10] = 1.5f;  // clipped on write
    write_wav(a, dir / "a.wav");
    const Audio b = read_wav(dir / "a.wav");
    CHECK(b.sample_rate == 22050);
    REQUIRE(b.samples.size() == a.samples.size());
    CHECK(b.samples[10] == doctest::Approx(1.0).epsilon(1e-4));
    for (std::size_t i = 0; i < a.samples.size(); i += 97)
        if (i != 10) CHECK(std::abs(b.samples[i] - a.samples[i]) <= 1.0 / 32767);

    a.samples[3] = std::nanf("");
    CHECK_THROWS_AS(write_wav(a, dir / "nan.wav"), NumericError);

    // Patch the format tag to IEEE float.
    {
        std::fstream f(dir / "a.wav", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(20);
        const std::uint16_t fmt = 3;
        f.write(reinterpret_cast<const char*>(&fmt), 2);
    }
    CHECK_THROWS_AS(read_wav(dir / "a.wav"), DataError);
    {
        std::ofstream f(dir / "junk.wav", std::ios::binary);
        f << "not a wave file at all";
    }
    CHECK_THROWS_AS(read_wav(dir / "junk.wav"), DataError);
    CHECK_THROWS_AS(read_wav(dir / "missing.wav"), DataError);
    std::filesystem::remove_all(dir);
}

}  // TEST_SUITE

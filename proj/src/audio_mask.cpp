#include "sonofield/audio_mask.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>

#include <fftw3.h>

#include "sonofield/error.hpp"

namespace sonofield {

namespace {

// fftw planning is not thread-safe
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

std::vector<double> hann(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    return w;
}

void check_framing(int sample_rate, int window, int hop) {
    if (sample_rate <= 0) throw UsageError("sample rate must be positive");
    if (window < 4 || window % 2 != 0) throw UsageError("STFT window must be even and >= 4");
    if (hop <= 0 || hop > window / 2) throw UsageError("STFT hop must be in (0, window/2]");
}

struct R2C {
    std::vector<double> in;
    std::vector<fftw_complex> out;
    fftw_plan plan = nullptr;
    explicit R2C(int n) : in(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n / 2 + 1)) {
        std::lock_guard lock(plan_mutex());
        plan = fftw_plan_dft_r2c_1d(n, in.data(), out.data(), FFTW_ESTIMATE);
    }
    ~R2C() {
        std::lock_guard lock(plan_mutex());
        fftw_destroy_plan(plan);
    }
    R2C(const R2C&) = delete;
    R2C& operator=(const R2C&) = delete;
};

struct C2R {
    std::vector<fftw_complex> in;
    std::vector<double> out;
    fftw_plan plan = nullptr;
    explicit C2R(int n) : in(static_cast<std::size_t>(n / 2 + 1)), out(static_cast<std::size_t>(n)) {
        std::lock_guard lock(plan_mutex());
        plan = fftw_plan_dft_c2r_1d(n, in.data(), out.data(), FFTW_ESTIMATE);
    }
    ~C2R() {
        std::lock_guard lock(plan_mutex());
        fftw_destroy_plan(plan);
    }
    C2R(const C2R&) = delete;
    C2R& operator=(const C2R&) = delete;
};

double wrap_angle(double a) {
    while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
    while (a < -std::numbers::pi) a += 2.0 * std::numbers::pi;
    return a;
}

bool parse_row(const std::string& line, std::vector<double>& out) {
    out.clear();
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const char* b = cell.c_str();
        char* e = nullptr;
        const double x = std::strtod(b, &e);
        if (e == b) return false;
        while (*e == ' ' || *e == '\t' || *e == '\r') ++e;
        if (*e != '\0') return false;
        out.push_back(x);
    }
    return true;
}

std::uint32_t rd32(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
std::uint16_t rd16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | p[1] << 8); }

void put32(std::string& s, std::uint32_t x) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}
void put16(std::string& s, std::uint16_t x) {
    s.push_back(static_cast<char>(x & 0xff));
    s.push_back(static_cast<char>(x >> 8));
}

}  // namespace

Spectrogram stft(std::span<const float> audio, int sample_rate, int window, int hop) {
    check_framing(sample_rate, window, hop);
    if (audio.size() < static_cast<std::size_t>(window))
        throw UsageError("audio has " + std::to_string(audio.size()) + " samples, fewer than the STFT window " +
                         std::to_string(window));
    Spectrogram s;
    s.sample_rate = sample_rate;
    s.window = window;
    s.hop = hop;
    s.length = audio.size();
    s.bins = static_cast<std::size_t>(window / 2 + 1);
    const auto n = static_cast<std::size_t>(window);
    const std::size_t pad = n / 2;
    s.frames = 1 + audio.size() / static_cast<std::size_t>(hop);
    s.data.resize(s.frames * s.bins);
    const std::vector<double> w = hann(window);
    R2C fft(window);
    for (std::size_t t = 0; t < s.frames; ++t) {
        const std::size_t start = t * static_cast<std::size_t>(hop);  // in padded coordinates
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t p = start + i;
            double x = 0.0;
            if (p >= pad && p - pad < audio.size()) x = audio[p - pad];
            fft.in[i] = x * w[i];
        }
        fftw_execute(fft.plan);
        for (std::size_t k = 0; k < s.bins; ++k) s.at(t, k) = {fft.out[k][0], fft.out[k][1]};
    }
    return s;
}

std::vector<float> istft(const Spectrogram& s) {
    check_framing(s.sample_rate, s.window, s.hop);
    if (s.bins != static_cast<std::size_t>(s.window / 2 + 1) || s.data.size() != s.frames * s.bins)
        throw DataError("spectrogram shape is inconsistent");
    const auto n = static_cast<std::size_t>(s.window);
    const std::size_t pad = n / 2;
    const std::size_t total = (s.frames - 1) * static_cast<std::size_t>(s.hop) + n;
    std::vector<double> acc(total, 0.0), norm(total, 0.0);
    const std::vector<double> w = hann(s.window);
    C2R ifft(s.window);
    for (std::size_t t = 0; t < s.frames; ++t) {
        for (std::size_t k = 0; k < s.bins; ++k) {
            ifft.in[k][0] = s.at(t, k).real();
            ifft.in[k][1] = s.at(t, k).imag();
        }
        fftw_execute(ifft.plan);
        const std::size_t start = t * static_cast<std::size_t>(s.hop);
        for (std::size_t i = 0; i < n; ++i) {
            acc[start + i] += ifft.out[i] / static_cast<double>(n) * w[i];
            norm[start + i] += w[i] * w[i];
        }
    }
    std::vector<float> out(s.length);
    for (std::size_t i = 0; i < s.length; ++i) {
        const double d = norm[i + pad];
        out[i] = d > 1e-10 ? static_cast<float>(acc[i + pad] / d) : 0.0f;
    }
    return out;
}

Trajectory load_trajectory_csv(const std::filesystem::path& path, std::size_t conditions) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open trajectory file " + path.string());
    Trajectory traj;
    std::string line;
    std::vector<double> row;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (!parse_row(line, row)) {
            if (line_no == 1) continue;  // header
            throw DataError("trajectory line " + std::to_string(line_no) + " is not numeric");
        }
        if (row.size() != conditions + 3)
            throw DataError("trajectory line " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                            " columns, expected " + std::to_string(conditions + 3));
        TrajectoryPoint p;
        p.v.assign(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(conditions));
        p.listener = {row[conditions], row[conditions + 1], row[conditions + 2]};
        traj.push_back(std::move(p));
    }
    if (traj.empty()) throw DataError("trajectory file " + path.string() + " has no rows");
    return traj;
}

void save_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out.precision(17);
    for (const TrajectoryPoint& p : traj) {
        for (double x : p.v) out << x << ',';
        out << p.listener.theta << ',' << p.listener.phi << ',' << p.listener.r << '\n';
    }
}

Trajectory resample_trajectory(const Trajectory& traj, std::size_t frames) {
    if (traj.empty()) throw UsageError("empty trajectory");
    if (frames == 0) throw UsageError("cannot resample to zero frames");
    if (traj.size() == frames) return traj;
    Trajectory out(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        const double pos = frames == 1 ? 0.0
                                       : static_cast<double>(t) * static_cast<double>(traj.size() - 1) /
                                             static_cast<double>(frames - 1);
        const auto i0 = std::min(static_cast<std::size_t>(pos), traj.size() - 1);
        const std::size_t i1 = std::min(i0 + 1, traj.size() - 1);
        const double a = pos - static_cast<double>(i0);
        const TrajectoryPoint &p = traj[i0], &q = traj[i1];
        TrajectoryPoint& o = out[t];
        o.v.resize(p.v.size());
        for (std::size_t j = 0; j < p.v.size(); ++j) o.v[j] = (1 - a) * p.v[j] + a * q.v[j];
        o.listener.theta = wrap_angle(p.listener.theta + a * wrap_angle(q.listener.theta - p.listener.theta));
        o.listener.phi = (1 - a) * p.listener.phi + a * q.listener.phi;
        o.listener.r = (1 - a) * p.listener.r + a * q.listener.r;
    }
    return out;
}

TransferMask TransferMask::constant(std::size_t frames, float value, int mask_bins, double f_max) {
    TransferMask m;
    m.frames = frames;
    m.mask_bins = mask_bins;
    m.f_max = f_max;
    m.values.assign(frames * static_cast<std::size_t>(mask_bins), value);
    return m;
}

TransferMask build_mask(const NeuralTransferField& field, const Trajectory& traj, std::size_t frames,
                        int mask_bins, double f_max, int channel) {
    if (mask_bins < 1) throw UsageError("mask needs at least one bin");
    if (!(f_max > 0.0)) throw UsageError("mask f_max must be positive");
    if (traj.size() != frames)
        throw UsageError("trajectory has " + std::to_string(traj.size()) + " points but the audio has " +
                         std::to_string(frames) + " frames");
    TransferMask m;
    m.frames = frames;
    m.mask_bins = mask_bins;
    m.f_max = f_max;
    std::vector<double> freqs(static_cast<std::size_t>(mask_bins));
    for (int b = 0; b < mask_bins; ++b) {
        freqs[static_cast<std::size_t>(b)] = m.bin_center(b);
        if (freqs[static_cast<std::size_t>(b)] < field.meta().f_min || freqs[static_cast<std::size_t>(b)] > field.meta().f_max)
            throw UsageError("mask bin center " + std::to_string(freqs[static_cast<std::size_t>(b)]) +
                             " Hz lies outside the field's frequency range");
    }
    std::vector<SphericalCoord> listeners(frames);
    std::vector<std::vector<double>> conds(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        listeners[t] = traj[t].listener;
        conds[t] = traj[t].v;
    }
    m.values = field.predict_grid(listeners, conds, freqs, channel);
    for (float& x : m.values) x = std::max(x, 0.0f);
    return m;
}

std::vector<double> expand_mask_frame(const TransferMask& mask, std::size_t t, const Spectrogram& spec,
                                      MaskExpansion mode) {
    std::vector<double> gain(spec.bins);
    const double width = mask.f_max / mask.mask_bins;
    for (std::size_t k = 0; k < spec.bins; ++k) {
        const double f = spec.bin_frequency(k);
        if (mode == MaskExpansion::nearest) {
            const int b = std::clamp(static_cast<int>(std::floor(f / width)), 0, mask.mask_bins - 1);
            gain[k] = mask.at(t, b);
        } else {
            const double pos = std::clamp(f / width - 0.5, 0.0, static_cast<double>(mask.mask_bins - 1));
            const int b0 = std::min(static_cast<int>(pos), mask.mask_bins - 1);
            const int b1 = std::min(b0 + 1, mask.mask_bins - 1);
            const double a = pos - b0;
            gain[k] = (1 - a) * mask.at(t, b0) + a * mask.at(t, b1);
        }
    }
    return gain;
}

std::vector<float> apply_mask(const Spectrogram& spec, const TransferMask& mask, MaskExpansion mode) {
    if (mask.frames != spec.frames)
        throw UsageError("mask has " + std::to_string(mask.frames) + " frames, spectrogram has " +
                         std::to_string(spec.frames));
    if (mask.values.size() != mask.frames * static_cast<std::size_t>(mask.mask_bins))
        throw DataError("mask shape is inconsistent");
    Spectrogram out = spec;
    for (std::size_t t = 0; t < spec.frames; ++t) {
        const std::vector<double> g = expand_mask_frame(mask, t, spec, mode);
        for (std::size_t k = 0; k < spec.bins; ++k) out.at(t, k) *= g[k];
    }
    return istft(out);
}

Audio read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string name = path.string();
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw DataError(name + " is not a RIFF/WAVE file");
    Audio a;
    bool have_fmt = false;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t size = rd32(&bytes[pos + 4]);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size())
            throw DataError(name + ": chunk at byte " + std::to_string(pos) + " runs past the end of the file");
        if (std::memcmp(&bytes[pos], "fmt ", 4) == 0) {
            if (size < 16) throw DataError(name + ": fmt chunk too short");
            const std::uint16_t format = rd16(&bytes[body]);
            const std::uint16_t channels = rd16(&bytes[body + 2]);
            const std::uint16_t bits = rd16(&bytes[body + 14]);
            if (format != 1) throw DataError(name + ": only PCM wav is supported");
            if (channels != 1) throw DataError(name + ": expected mono, got " + std::to_string(channels) + " channels");
            if (bits != 16) throw DataError(name + ": expected 16-bit samples, got " + std::to_string(bits));
            a.sample_rate = static_cast<int>(rd32(&bytes[body + 4]));
            have_fmt = true;
        } else if (std::memcmp(&bytes[pos], "data", 4) == 0) {
            if (!have_fmt) throw DataError(name + ": data chunk before fmt chunk");
            const std::size_t n = size / 2;
            a.samples.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                a.samples[i] = static_cast<float>(static_cast<std::int16_t>(rd16(&bytes[body + 2 * i]))) / 32768.0f;
            if (a.sample_rate <= 0) throw DataError(name + ": invalid sample rate");
            return a;
        }
        pos = body + size + (size & 1u);
    }
    throw DataError(name + " has no data chunk");
}

void write_wav(const Audio& audio, const std::filesystem::path& path) {
    if (audio.sample_rate <= 0) throw UsageError("sample rate must be positive");
    const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
    std::string s;
    s.reserve(44 + data_bytes);
    s += "RIFF";
    put32(s, 36 + data_bytes);
    s += "WAVEfmt ";
    put32(s, 16);
    put16(s, 1);
    put16(s, 1);
    put32(s, static_cast<std::uint32_t>(audio.sample_rate));
    put32(s, static_cast<std::uint32_t>(audio.sample_rate) * 2);
    put16(s, 2);
    put16(s, 16);
    s += "data";
    put32(s, data_bytes);
    for (float x : audio.samples) {
        if (!std::isfinite(x)) throw NumericError("non-finite audio sample");
        const double c = std::clamp(static_cast<double>(x), -1.0, 32767.0 / 32768.0);
        put16(s, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32768.0))));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

}  // namespace sonofield

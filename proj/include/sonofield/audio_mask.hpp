#pragma once

#include <complex>
#include <filesystem>
#include <span>
#include <vector>

#include "sonofield/geometry.hpp"
#include "sonofield/neural_field.hpp"

namespace sonofield {

/// Hann-windowed STFT with centered frames (window/2 zero padding at both ends).
struct Spectrogram {
    int sample_rate = 0;
    int window = 1024;
    int hop = 512;
    std::size_t frames = 0;
    std::size_t bins = 0;  // window / 2 + 1
    std::size_t length = 0;  // source sample count
    std::vector<std::complex<double>> data;  // frames x bins, row-major

    std::complex<double>& at(std::size_t t, std::size_t k) { return data[t * bins + k]; }
    [[nodiscard]] const std::complex<double>& at(std::size_t t, std::size_t k) const { return data[t * bins + k]; }
    [[nodiscard]] double bin_frequency(std::size_t k) const {
        return static_cast<double>(k) * sample_rate / window;
    }
};

Spectrogram stft(std::span<const float> audio, int sample_rate, int window = 1024, int hop = 512);
/// Weighted overlap-add inverse; returns `length` samples.
std::vector<float> istft(const Spectrogram& spec);

struct TrajectoryPoint {
    std::vector<double> v;
    SphericalCoord listener;
};
using Trajectory = std::vector<TrajectoryPoint>;

/// CSV rows "v1,...,vn,theta,phi,r"; a non-numeric first line is a header.
Trajectory load_trajectory_csv(const std::filesystem::path& path, std::size_t conditions);
void save_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);
/// Linear resampling to `frames` points (theta along the shorter arc).
Trajectory resample_trajectory(const Trajectory& traj, std::size_t frames);

struct TransferMask {
    std::size_t frames = 0;
    int mask_bins = 64;
    double f_max = 8000.0;
    std::vector<float> values;  // frames x mask_bins, row-major, >= 0

    [[nodiscard]] float at(std::size_t t, int b) const { return values[t * static_cast<std::size_t>(mask_bins) + static_cast<std::size_t>(b)]; }
    [[nodiscard]] double bin_center(int b) const { return (b + 0.5) * f_max / mask_bins; }
    static TransferMask constant(std::size_t frames, float value, int mask_bins = 64, double f_max = 8000.0);
};

/// mask(t, b) = predicted |p| at f_b = (b + 0.5) f_max / mask_bins for the
/// trajectory's condition and listener at frame t (negatives clamped).
TransferMask build_mask(const NeuralTransferField& field, const Trajectory& traj, std::size_t frames,
                        int mask_bins = 64, double f_max = 8000.0, int channel = 0);

enum class MaskExpansion { nearest, linear };

/// Per STFT bin multiplier for frame t.
std::vector<double> expand_mask_frame(const TransferMask& mask, std::size_t t, const Spectrogram& spec,
                                      MaskExpansion mode = MaskExpansion::nearest);

/// Scales magnitudes per bin, keeps the source phase, and inverts.
std::vector<float> apply_mask(const Spectrogram& spec, const TransferMask& mask,
                              MaskExpansion mode = MaskExpansion::nearest);

struct Audio {
    int sample_rate = 0;
    std::vector<float> samples;  // mono, nominally in [-1, 1]
};

/// 16-bit PCM mono RIFF/WAVE.
Audio read_wav(const std::filesystem::path& path);
/// Clips to [-1, 1] and writes 16-bit PCM mono.
void write_wav(const Audio& audio, const std::filesystem::path& path);

}  // namespace sonofield

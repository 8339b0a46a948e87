#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sonofield/mc_bem.hpp"
#include "sonofield/scenes.hpp"

namespace sonofield {

inline constexpr int kDatasetFormatVersion = 1;

struct DatasetManifest {
    int format_version = kDatasetFormatVersion;
    SceneSpec scene;
    std::vector<std::string> labels;  // n condition dimensions, each normalized to [0, 1]
    double f_min = 0.0;
    double f_max = 0.0;
    // Listener shell: points uniform in volume between r_min and r_max around origin.
    Vec3 origin = Vec3::Zero();
    double reference_radius = 1.0;
    double r_min = 0.0;
    double r_max = 0.0;
    int outputs = 1;  // D
    std::size_t configs_requested = 0;
    std::size_t configs_written = 0;
    std::size_t configs_skipped = 0;
    std::size_t points_per_config = 0;
    std::size_t records = 0;
    SceneSolveOptions solver;
    std::uint64_t seed = 0;
    std::string records_file = "records.bin";
    std::string records_hash;  // FNV-1a 64 of the record file, hex

    [[nodiscard]] std::size_t conditions() const { return labels.size(); }
    /// Floats per record: theta, phi, r, v..., f, targets...
    [[nodiscard]] std::size_t stride() const { return 3 + conditions() + 1 + static_cast<std::size_t>(outputs); }
    [[nodiscard]] double normalize_f(double f) const;
    [[nodiscard]] double denormalize_f(double fn) const;
    [[nodiscard]] double normalize_r(double r) const;
    [[nodiscard]] double denormalize_r(double rn) const;
};

nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const nlohmann::json& j);

/// Normalized inputs and raw |p| targets.
struct SampleRecord {
    double theta = 0.0;
    double phi = 0.0;
    double r = 0.0;
    std::vector<double> v;
    double f = 0.0;
    std::vector<double> target;
};

struct GenerateOptions {
    std::size_t configs = 1;
    std::size_t points_per_config = 10000;
    std::uint64_t seed = 0;
    SceneSolveOptions solver;
    std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Solves `configs` random (v, f) draws of the scene and writes
/// manifest.json plus the float32 record file into `dir`.
DatasetManifest generate_dataset(const SceneSpec& spec, const GenerateOptions& options,
                                 const std::filesystem::path& dir);

DatasetManifest read_manifest(const std::filesystem::path& dir);

/// Streams validated records from a dataset directory.
class RecordReader {
public:
    explicit RecordReader(const std::filesystem::path& dir);
    [[nodiscard]] const DatasetManifest& manifest() const { return manifest_; }
    /// False once all declared records were read.
    bool next(SampleRecord& record);

private:
    DatasetManifest manifest_;
    std::ifstream in_;
    std::vector<float> buffer_;
    std::size_t index_ = 0;
};

std::vector<SampleRecord> read_records(const std::filesystem::path& dir);

/// Whole dataset in memory as a flat float array of records.
struct Dataset {
    DatasetManifest manifest;
    std::vector<float> data;

    [[nodiscard]] std::size_t size() const { return manifest.records; }
    [[nodiscard]] const float* record(std::size_t i) const { return data.data() + i * manifest.stride(); }
};

Dataset load_dataset(const std::filesystem::path& dir);
/// In-memory dataset from records (manifest fields other than counts are copied).
Dataset make_dataset(const DatasetManifest& manifest, const std::vector<SampleRecord>& records);

/// Throws DataError naming the record when a field is non-finite or a
/// normalized field leaves [0, 1].
void validate_record(const float* rec, const DatasetManifest& m, std::size_t index);

std::string fnv1a_hex(const std::filesystem::path& path);

}  // namespace sonofield

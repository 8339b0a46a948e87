#include "sonofield/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "sonofield/binary_io.hpp"
#include "sonofield/error.hpp"
#include "sonofield/rng.hpp"

namespace sonofield {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kShellMin = 1.5;
constexpr double kShellMax = 3.0;
constexpr double kNormSlack = 1e-6;

using nlohmann::json;

const char* sampler_name(SamplerKind k) { return k == SamplerKind::poisson ? "poisson" : "uniform"; }

SamplerKind sampler_from(const std::string& s) {
    if (s == "poisson") return SamplerKind::poisson;
    if (s == "uniform") return SamplerKind::uniform;
    throw DataError("unknown sampler '" + s + "'");
}

template <typename T>
T field(const json& j, const char* key) {
    if (!j.contains(key)) throw DataError(std::string("manifest is missing '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw DataError(std::string("manifest field '") + key + "': " + e.what());
    }
}

}  // namespace

double DatasetManifest::normalize_f(double f) const { return f_max > f_min ? (f - f_min) / (f_max - f_min) : 0.0; }
double DatasetManifest::denormalize_f(double fn) const { return f_min + fn * (f_max - f_min); }
double DatasetManifest::normalize_r(double r) const { return (r - r_min) / (r_max - r_min); }
double DatasetManifest::denormalize_r(double rn) const { return r_min + rn * (r_max - r_min); }

json to_json(const SceneSpec& spec) {
    json j{{"id", spec.id}, {"params", spec.params}};
    if (spec.neumann_file) j["neumann_file"] = spec.neumann_file->string();
    return j;
}

SceneSpec scene_spec_from_json(const json& j) {
    SceneSpec s;
    s.id = field<std::string>(j, "id");
    if (j.contains("params")) s.params = field<std::map<std::string, double>>(j, "params");
    if (j.contains("neumann_file")) s.neumann_file = field<std::string>(j, "neumann_file");
    return s;
}

json to_json(const DatasetManifest& m) {
    return json{
        {"format_version", m.format_version},
        {"scene", to_json(m.scene)},
        {"labels", m.labels},
        {"frequency_range", {m.f_min, m.f_max}},
        {"shell",
         {{"origin", {m.origin.x(), m.origin.y(), m.origin.z()}},
          {"reference_radius", m.reference_radius},
          {"r_min", m.r_min},
          {"r_max", m.r_max},
          {"rule", "uniform in volume, r in [1.5 R, 3 R]"}}},
        {"outputs", m.outputs},
        {"configs_requested", m.configs_requested},
        {"configs_written", m.configs_written},
        {"configs_skipped", m.configs_skipped},
        {"points_per_config", m.points_per_config},
        {"records", m.records},
        {"solver",
         {{"samples", m.solver.samples},
          {"sampler", sampler_name(m.solver.sampler)},
          {"tol", m.solver.solver.tol},
          {"max_iter", m.solver.solver.max_iter},
          {"seed_policy", "per-config seeds derived from the dataset seed"}}},
        {"seed", m.seed},
        {"records_file", m.records_file},
        {"records_hash", m.records_hash},
        {"layout", "float32 LE: theta_n, phi_n, r_n, v[n], f_n, |p|[D]"},
    };
}

DatasetManifest manifest_from_json(const json& j) {
    DatasetManifest m;
    m.format_version = field<int>(j, "format_version");
    if (m.format_version != kDatasetFormatVersion)
        throw DataError("dataset format version " + std::to_string(m.format_version) + " is not supported (expected " +
                        std::to_string(kDatasetFormatVersion) + ")");
    m.scene = scene_spec_from_json(field<json>(j, "scene"));
    m.labels = field<std::vector<std::string>>(j, "labels");
    const auto fr = field<std::vector<double>>(j, "frequency_range");
    if (fr.size() != 2) throw DataError("frequency_range must have two entries");
    m.f_min = fr[0];
    m.f_max = fr[1];
    const json shell = field<json>(j, "shell");
    const auto o = field<std::vector<double>>(shell, "origin");
    if (o.size() != 3) throw DataError("shell origin must have three entries");
    m.origin = Vec3(o[0], o[1], o[2]);
    m.reference_radius = field<double>(shell, "reference_radius");
    m.r_min = field<double>(shell, "r_min");
    m.r_max = field<double>(shell, "r_max");
    if (!(m.r_max > m.r_min && m.r_min > 0.0)) throw DataError("invalid shell radii");
    m.outputs = field<int>(j, "outputs");
    if (m.outputs < 1) throw DataError("outputs must be >= 1");
    m.configs_requested = field<std::size_t>(j, "configs_requested");
    m.configs_written = field<std::size_t>(j, "configs_written");
    m.configs_skipped = field<std::size_t>(j, "configs_skipped");
    m.points_per_config = field<std::size_t>(j, "points_per_config");
    m.records = field<std::size_t>(j, "records");
    const json solver = field<json>(j, "solver");
    m.solver.samples = field<std::size_t>(solver, "samples");
    m.solver.sampler = sampler_from(field<std::string>(solver, "sampler"));
    m.solver.solver.tol = field<double>(solver, "tol");
    m.solver.solver.max_iter = field<int>(solver, "max_iter");
    m.seed = field<std::uint64_t>(j, "seed");
    m.records_file = field<std::string>(j, "records_file");
    m.records_hash = j.value("records_hash", std::string());
    return m;
}

std::string fnv1a_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

DatasetManifest generate_dataset(const SceneSpec& spec, const GenerateOptions& options,
                                 const std::filesystem::path& dir) {
    if (options.configs < 1) throw UsageError("dataset needs at least one configuration");
    if (options.points_per_config < 1) throw UsageError("points per configuration must be >= 1");
    const std::vector<std::string> labels = scene_condition_labels(spec);
    const std::size_t n = labels.size();

    // Envelope and frequency range come from the scene family; build the
    // mid-range instance to read them.
    const SceneInstance probe = build_scene(spec, std::vector<double>(n, 0.5));
    DatasetManifest m;
    m.scene = spec;
    m.labels = labels;
    m.f_min = probe.f_min;
    m.f_max = probe.f_max;
    m.origin = probe.origin;
    m.reference_radius = probe.reference_radius;
    m.r_min = kShellMin * probe.reference_radius;
    m.r_max = kShellMax * probe.reference_radius;
    m.configs_requested = options.configs;
    m.points_per_config = options.points_per_config;
    m.solver = options.solver;
    m.seed = options.seed;

    std::filesystem::create_directories(dir);
    const std::filesystem::path records_path = dir / m.records_file;
    std::ofstream out(records_path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + records_path.string());

    const double r3_lo = std::pow(m.r_min, 3), r3_hi = std::pow(m.r_max, 3);
    std::vector<Vec3> xs(options.points_per_config);
    std::vector<SphericalCoord> sph(options.points_per_config);
    for (std::size_t c = 0; c < options.configs; ++c) {
        Rng rng(mix_seed(options.seed, c));
        std::vector<double> v(n);
        for (double& x : v) x = rng.uniform();
        const double f = rng.uniform(m.f_min, m.f_max);
        SceneSolveOptions so = options.solver;
        so.seed = rng.next();
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double theta = rng.uniform(-kPi, kPi);
            const double phi = std::acos(std::clamp(1.0 - 2.0 * rng.uniform(), -1.0, 1.0));
            const double r = std::cbrt(r3_lo + rng.uniform() * (r3_hi - r3_lo));
            sph[i] = {theta, phi, std::clamp(r, m.r_min, m.r_max)};
            xs[i] = from_spherical(sph[i], m.origin);
        }
        try {
            const SceneInstance scene = build_scene(spec, v);
            const SolvedBoundaryField field = solve_scene(scene, f, so);
            if (!field.converged)
                throw NumericError("GMRES stopped at residual " + std::to_string(field.residual) + " after " +
                                   std::to_string(field.iterations) + " iterations");
            const std::vector<Complex> p = eval_exterior(field, xs);
            for (std::size_t i = 0; i < xs.size(); ++i) {
                binio::put<float>(out, static_cast<float>(sph[i].theta_normalized()));
                binio::put<float>(out, static_cast<float>(sph[i].phi_normalized()));
                binio::put<float>(out, static_cast<float>(m.normalize_r(sph[i].r)));
                for (double x : v) binio::put<float>(out, static_cast<float>(x));
                binio::put<float>(out, static_cast<float>(m.normalize_f(f)));
                binio::put<float>(out, static_cast<float>(std::abs(p[i])));
            }
            ++m.configs_written;
        } catch (const std::runtime_error& e) {
            // DataError and NumericError: skip this configuration.
            warn("dataset config " + std::to_string(c) + " skipped: " + e.what());
            ++m.configs_skipped;
        }
        if (options.progress) options.progress(c + 1, options.configs);
    }
    out.close();
    if (!out) throw DataError("failed writing " + records_path.string());
    if (m.configs_written == 0) throw NumericError("every dataset configuration failed");
    m.records = m.configs_written * options.points_per_config;
    m.records_hash = fnv1a_hex(records_path);

    const std::filesystem::path manifest_path = dir / "manifest.json";
    std::ofstream mf(manifest_path);
    if (!mf) throw DataError("cannot write " + manifest_path.string());
    mf << to_json(m).dump(2) << '\n';
    if (!mf) throw DataError("failed writing " + manifest_path.string());
    return m;
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
    const std::filesystem::path path = dir / "manifest.json";
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return manifest_from_json(j);
}

void validate_record(const float* rec, const DatasetManifest& m, std::size_t index) {
    const std::size_t normalized = 3 + m.conditions() + 1;
    for (std::size_t k = 0; k < m.stride(); ++k) {
        if (!std::isfinite(rec[k]))
            throw DataError("non-finite value in record " + std::to_string(index) + " (field " + std::to_string(k) + ")");
        if (k < normalized && !(rec[k] >= -kNormSlack && rec[k] <= 1.0 + kNormSlack))
            throw DataError("normalized field " + std::to_string(k) + " of record " + std::to_string(index) +
                            " outside [0, 1]");
        if (k >= normalized && rec[k] < 0.0f)
            throw DataError("negative target in record " + std::to_string(index));
    }
}

namespace {

std::ifstream open_records(const std::filesystem::path& dir, const DatasetManifest& m) {
    const std::filesystem::path path = dir / m.records_file;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    const auto expected = static_cast<std::uintmax_t>(m.records * m.stride() * sizeof(float));
    const auto actual = std::filesystem::file_size(path);
    if (actual < expected)
        throw DataError(path.string() + " truncated: ends at byte offset " + std::to_string(actual) + ", expected " +
                        std::to_string(expected) + " bytes");
    if (actual > expected)
        throw DataError(path.string() + " has " + std::to_string(actual - expected) +
                        " trailing bytes beyond the declared record count");
    return in;
}

void read_floats(std::ifstream& in, float* dst, std::size_t count) {
    for (std::size_t k = 0; k < count; ++k) dst[k] = binio::get<float>(in, "record");
}

}  // namespace

RecordReader::RecordReader(const std::filesystem::path& dir)
    : manifest_(read_manifest(dir)), in_(open_records(dir, manifest_)), buffer_(manifest_.stride()) {}

bool RecordReader::next(SampleRecord& record) {
    if (index_ >= manifest_.records) return false;
    read_floats(in_, buffer_.data(), buffer_.size());
    validate_record(buffer_.data(), manifest_, index_);
    const std::size_t n = manifest_.conditions();
    record.theta = buffer_[0];
    record.phi = buffer_[1];
    record.r = buffer_[2];
    record.v.assign(buffer_.begin() + 3, buffer_.begin() + 3 + static_cast<std::ptrdiff_t>(n));
    record.f = buffer_[3 + n];
    record.target.assign(buffer_.begin() + 4 + static_cast<std::ptrdiff_t>(n), buffer_.end());
    ++index_;
    return true;
}

std::vector<SampleRecord> read_records(const std::filesystem::path& dir) {
    RecordReader reader(dir);
    std::vector<SampleRecord> out;
    out.reserve(reader.manifest().records);
    SampleRecord r;
    while (reader.next(r)) out.push_back(r);
    return out;
}

Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset d;
    d.manifest = read_manifest(dir);
    std::ifstream in = open_records(dir, d.manifest);
    const std::size_t stride = d.manifest.stride();
    d.data.resize(d.manifest.records * stride);
    in.read(reinterpret_cast<char*>(d.data.data()), static_cast<std::streamsize>(d.data.size() * sizeof(float)));
    if (!in) throw DataError("truncated record file at byte offset " + std::to_string(in.gcount()));
    if constexpr (std::endian::native == std::endian::big)
        for (float& x : d.data) x = binio::byteswap_if_big(x);
    for (std::size_t i = 0; i < d.manifest.records; ++i) validate_record(d.record(i), d.manifest, i);
    return d;
}

Dataset make_dataset(const DatasetManifest& manifest, const std::vector<SampleRecord>& records) {
    Dataset d;
    d.manifest = manifest;
    d.manifest.records = records.size();
    const std::size_t stride = manifest.stride();
    d.data.reserve(records.size() * stride);
    for (const SampleRecord& r : records) {
        if (r.v.size() != manifest.conditions() || r.target.size() != static_cast<std::size_t>(manifest.outputs))
            throw UsageError("record shape does not match the manifest");
        d.data.push_back(static_cast<float>(r.theta));
        d.data.push_back(static_cast<float>(r.phi));
        d.data.push_back(static_cast<float>(r.r));
        for (double x : r.v) d.data.push_back(static_cast<float>(x));
        d.data.push_back(static_cast<float>(r.f));
        for (double x : r.target) d.data.push_back(static_cast<float>(x));
    }
    for (std::size_t i = 0; i < d.size(); ++i) validate_record(d.record(i), d.manifest, i);
    return d;
}

}  // namespace sonofield

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sonofield/dataset.hpp"
#include "sonofield/ffat.hpp"

namespace sonofield {

struct EncodingConfig {
    int pe_octaves = 6;
    std::vector<int> grid_resolutions{8, 16, 32, 64};  // per axis, 3D lattices over (theta, phi, r)
    int grid_feature_dim = 4;
    bool hashed = false;     // spatial hash for levels with more nodes than the table
    int hash_table_log2 = 16;

    void validate() const;
    [[nodiscard]] int levels() const { return static_cast<int>(grid_resolutions.size()); }
    [[nodiscard]] int grid_dim() const { return levels() * grid_feature_dim; }
    [[nodiscard]] int pe_dim() const { return 2 * pe_octaves; }
    [[nodiscard]] int input_dim(std::size_t conditions) const {
        return grid_dim() + pe_dim() * static_cast<int>(conditions + 1);
    }
    /// Feature vectors stored for a level (res^3, or the hash table size).
    [[nodiscard]] std::size_t level_nodes(int level) const;
    [[nodiscard]] bool level_hashed(int level) const;
};

struct MlpShape {
    int hidden_layers = 4;
    int hidden_width = 128;
    int outputs = 1;  // D
};

/// (sin 2^0 pi x, cos 2^0 pi x, ..., sin 2^(o-1) pi x, cos 2^(o-1) pi x).
/// Inputs outside [0, 1] are clamped with a warning.
std::vector<double> positional_encode(double x, int octaves = 6);

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Col = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Every trainable tensor. grids[l] is feature_dim x nodes; weights[i] is
/// out x in.
template <typename S>
struct NetworkParams {
    std::vector<Mat<S>> grids;
    std::vector<Mat<S>> weights;
    std::vector<Col<S>> biases;

    [[nodiscard]] std::size_t size() const;
    /// Views of all tensors in serialization order: grids, then (W, b) per layer.
    std::vector<std::span<S>> blocks();
    std::vector<std::span<const S>> blocks() const;
    template <typename T>
    [[nodiscard]] NetworkParams<T> cast() const;
    /// Same shapes, zero filled.
    [[nodiscard]] NetworkParams zeros_like() const;
};

extern template struct NetworkParams<float>;
extern template struct NetworkParams<double>;

/// Random initialization: grid features uniform in [-1e-4, 1e-4], weights
/// uniform in +-sqrt(6 / fan_in), zero biases.
NetworkParams<float> init_params(const EncodingConfig& enc, const MlpShape& shape, std::size_t conditions,
                                 std::uint64_t seed);

/// Trilinear grid features for normalized (theta, phi, r) in [0, 1]^3
/// (clamped), level-major.
template <typename S>
Col<S> grid_encode(const NetworkParams<S>& params, const EncodingConfig& enc, S theta_n, S phi_n, S r_n);

/// Batched forward pass on normalized inputs; each column of `inputs` is
/// (theta_n, phi_n, r_n, v..., f_n). Returns outputs x batch (scaled units).
template <typename S>
Mat<S> forward_normalized(const NetworkParams<S>& params, const EncodingConfig& enc, const Mat<S>& inputs);

/// Mean squared error over all batch entries and outputs, with exact
/// gradients accumulated into `grads` (overwritten).
template <typename S>
S loss_and_gradients(const NetworkParams<S>& params, const EncodingConfig& enc, const Mat<S>& inputs,
                     const Mat<S>& targets, NetworkParams<S>& grads);

struct FieldMeta {
    SceneSpec scene;
    std::vector<std::string> labels;
    Vec3 origin = Vec3::Zero();
    double r_min = 1.0;
    double r_max = 2.0;
    double f_min = 0.0;
    double f_max = 1.0;
    double target_scale = 1.0;  // network outputs are |p| / target_scale
    std::string provenance;     // record-file hash of the training dataset
    std::size_t steps_trained = 0;
    std::vector<double> epoch_loss;
};

struct TrainConfig {
    std::size_t steps = 30000;
    std::size_t batch = 4096;
    double lr = 1e-3;
    double decay = 0.33;  // applied at 1/3 and 2/3 of the steps
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled, grids and weights only
    std::uint64_t seed = 0;
    EncodingConfig encoding;
    MlpShape shape;  // outputs is taken from the dataset
    std::function<void(std::size_t step, double loss)> on_step;
};

/// Trained conditional field. Immutable once built; evaluation is thread-safe.
class NeuralTransferField {
public:
    NeuralTransferField(EncodingConfig enc, MlpShape shape, FieldMeta meta, NetworkParams<float> params);

    [[nodiscard]] const EncodingConfig& encoding() const { return enc_; }
    [[nodiscard]] const MlpShape& shape() const { return shape_; }
    [[nodiscard]] const FieldMeta& meta() const { return meta_; }
    [[nodiscard]] const NetworkParams<float>& params() const { return params_; }
    [[nodiscard]] std::size_t conditions() const { return meta_.labels.size(); }
    [[nodiscard]] int outputs() const { return shape_.outputs; }
    [[nodiscard]] bool trained() const { return meta_.steps_trained > 0; }

    /// Predicted |p| per output for a listener at (theta, phi, r) around the
    /// field origin, condition v (normalized) and frequency f in Hz.
    [[nodiscard]] std::vector<double> forward(double theta, double phi, double r, std::span<const double> v,
                                              double f) const;

    struct Query {
        double theta, phi, r;
        std::vector<double> v;
        double f;
    };
    /// Row-major queries x outputs.
    [[nodiscard]] std::vector<double> forward_batch(std::span<const Query> queries) const;

    /// Map of output `channel`; negative predictions are clamped to 0.
    [[nodiscard]] FfatMap predict_map(std::span<const double> v, double f, double r, int width = 64, int height = 32,
                                      int channel = 0) const;

    /// Row-major frames x freqs magnitudes for per-frame listener/condition
    /// and shared frequencies, unclamped, channel `channel`.
    [[nodiscard]] std::vector<float> predict_grid(std::span<const SphericalCoord> listeners,
                                                  std::span<const std::vector<double>> conditions,
                                                  std::span<const double> freqs, int channel = 0) const;

    /// Throws UsageError naming the offending input when outside the
    /// declared ranges.
    void check_inputs(double theta, double phi, double r, std::span<const double> v, double f) const;

    void save(const std::filesystem::path& path) const;
    static NeuralTransferField load(const std::filesystem::path& path);

private:
    struct Inference;

    EncodingConfig enc_;
    MlpShape shape_;
    FieldMeta meta_;
    NetworkParams<float> params_;
    std::shared_ptr<const Inference> infer_;
};

/// Adam with staged decay on the dataset. Deterministic per seed.
NeuralTransferField train(const Dataset& data, const TrainConfig& config);

inline constexpr std::uint32_t kModelVersion = 1;

}  // namespace sonofield

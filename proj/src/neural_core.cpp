// Encodings, forward and reverse passes of the fixed field architecture,
// templated on the scalar so gradients can be checked in double.
#include <algorithm>
#include <cmath>
#include <numbers>

#include "sonofield/error.hpp"
#include "sonofield/neural_field.hpp"
#include "sonofield/rng.hpp"

namespace sonofield {

namespace {

constexpr std::uint32_t kHashPrimes[3] = {1u, 2654435761u, 805459861u};

template <typename S>
struct Corners {
    std::array<std::uint32_t, 8> idx;
    std::array<S, 8> w;
};

template <typename S>
void level_corners(const EncodingConfig& enc, int level, const S* pos, Corners<S>& c) {
    const int res = enc.grid_resolutions[static_cast<std::size_t>(level)];
    std::uint32_t i0[3];
    S t[3];
    for (int a = 0; a < 3; ++a) {
        const S x = std::clamp(pos[a], S(0), S(1)) * S(res - 1);
        const int i = std::min(static_cast<int>(std::floor(x)), res - 2);
        i0[a] = static_cast<std::uint32_t>(i);
        t[a] = x - S(i);
    }
    const bool hashed = enc.level_hashed(level);
    const std::uint32_t mask = (1u << enc.hash_table_log2) - 1u;
    const auto ures = static_cast<std::uint32_t>(res);
    for (std::uint32_t k = 0; k < 8; ++k) {
        const std::uint32_t ix = i0[0] + (k & 1u), iy = i0[1] + ((k >> 1) & 1u), iz = i0[2] + ((k >> 2) & 1u);
        c.w[k] = ((k & 1u) ? t[0] : S(1) - t[0]) * (((k >> 1) & 1u) ? t[1] : S(1) - t[1]) *
                 (((k >> 2) & 1u) ? t[2] : S(1) - t[2]);
        c.idx[k] = hashed ? ((ix * kHashPrimes[0]) ^ (iy * kHashPrimes[1]) ^ (iz * kHashPrimes[2])) & mask
                          : ix + ures * (iy + ures * iz);
    }
}

template <typename S>
void encode_column(const NetworkParams<S>& p, const EncodingConfig& enc, const S* in, std::size_t conditions, S* x,
                   Corners<S>* corners) {
    const int f = enc.grid_feature_dim;
    for (int l = 0; l < enc.levels(); ++l) {
        Corners<S> c;
        level_corners(enc, l, in, c);
        const Mat<S>& g = p.grids[static_cast<std::size_t>(l)];
        for (int q = 0; q < f; ++q) x[l * f + q] = S(0);
        for (int k = 0; k < 8; ++k)
            for (int q = 0; q < f; ++q) x[l * f + q] += c.w[k] * g(q, c.idx[k]);
        if (corners) corners[l] = c;
    }
    S* pe = x + enc.grid_dim();
    for (std::size_t d = 0; d <= conditions; ++d) {
        const S v = std::clamp(in[3 + d], S(0), S(1));
        for (int j = 0; j < enc.pe_octaves; ++j) {
            const S arg = S(std::ldexp(std::numbers::pi, j)) * v;
            *pe++ = std::sin(arg);
            *pe++ = std::cos(arg);
        }
    }
}

template <typename S>
struct Tape {
    std::vector<Mat<S>> act;  // act[0] = encoded input, act[i] = output of layer i-1 after ReLU
    std::vector<Corners<S>> corners;
};

template <typename S>
Mat<S> run_forward(const NetworkParams<S>& p, const EncodingConfig& enc, const Mat<S>& inputs, Tape<S>* tape) {
    if (inputs.rows() < 4) throw UsageError("input columns need theta, phi, r and f");
    const auto conditions = static_cast<std::size_t>(inputs.rows() - 4);
    const int in_dim = enc.input_dim(conditions);
    if (p.weights.empty() || p.weights.front().cols() != in_dim)
        throw UsageError("input has " + std::to_string(conditions) + " condition values; field expects " +
                         std::to_string(p.weights.empty() ? 0 : (p.weights.front().cols() - enc.grid_dim()) /
                                                                        enc.pe_dim() -
                                                                    1));
    const Eigen::Index batch = inputs.cols();
    Mat<S> x(in_dim, batch);
    if (tape) tape->corners.resize(static_cast<std::size_t>(batch * enc.levels()));
    for (Eigen::Index b = 0; b < batch; ++b)
        encode_column(p, enc, inputs.col(b).data(), conditions, x.col(b).data(),
                      tape ? tape->corners.data() + b * enc.levels() : nullptr);

    const std::size_t layers = p.weights.size();
    if (tape) {
        tape->act.resize(layers);
        tape->act[0] = x;
    }
    Mat<S> h = std::move(x);
    for (std::size_t i = 0; i < layers; ++i) {
        Mat<S> z = p.weights[i] * h;
        z.colwise() += p.biases[i];
        if (i + 1 < layers) {
            z = z.cwiseMax(S(0));
            if (tape) tape->act[i + 1] = z;
        }
        h = std::move(z);
    }
    return h;
}

}  // namespace

void EncodingConfig::validate() const {
    if (pe_octaves < 1) throw UsageError("positional encoding needs at least one octave");
    if (grid_resolutions.empty()) throw UsageError("at least one grid level is required");
    for (std::size_t i = 0; i < grid_resolutions.size(); ++i) {
        if (grid_resolutions[i] < 2) throw UsageError("grid resolution must be >= 2");
        if (i > 0 && grid_resolutions[i] <= grid_resolutions[i - 1])
            throw UsageError("grid resolutions must be strictly increasing");
    }
    if (grid_feature_dim < 1) throw UsageError("grid feature dimension must be >= 1");
    if (hash_table_log2 < 4 || hash_table_log2 > 24) throw UsageError("hash table size out of range");
}

bool EncodingConfig::level_hashed(int level) const {
    const auto res = static_cast<std::size_t>(grid_resolutions[static_cast<std::size_t>(level)]);
    return hashed && res * res * res > (std::size_t{1} << hash_table_log2);
}

std::size_t EncodingConfig::level_nodes(int level) const {
    const auto res = static_cast<std::size_t>(grid_resolutions[static_cast<std::size_t>(level)]);
    return level_hashed(level) ? std::size_t{1} << hash_table_log2 : res * res * res;
}

std::vector<double> positional_encode(double x, int octaves) {
    if (!std::isfinite(x)) throw UsageError("positional encoding input must be finite");
    if (x < 0.0 || x > 1.0) {
        warn("positional encoding input " + std::to_string(x) + " clamped to [0, 1]");
        x = std::clamp(x, 0.0, 1.0);
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(2 * octaves));
    for (int j = 0; j < octaves; ++j) {
        const double arg = std::ldexp(std::numbers::pi, j) * x;
        out.push_back(std::sin(arg));
        out.push_back(std::cos(arg));
    }
    return out;
}

template <typename S>
std::size_t NetworkParams<S>::size() const {
    std::size_t n = 0;
    for (const auto& b : blocks()) n += b.size();
    return n;
}

template <typename S>
std::vector<std::span<S>> NetworkParams<S>::blocks() {
    std::vector<std::span<S>> out;
    for (auto& g : grids) out.emplace_back(g.data(), static_cast<std::size_t>(g.size()));
    for (std::size_t i = 0; i < weights.size(); ++i) {
        out.emplace_back(weights[i].data(), static_cast<std::size_t>(weights[i].size()));
        out.emplace_back(biases[i].data(), static_cast<std::size_t>(biases[i].size()));
    }
    return out;
}

template <typename S>
std::vector<std::span<const S>> NetworkParams<S>::blocks() const {
    std::vector<std::span<const S>> out;
    for (const auto& b : const_cast<NetworkParams*>(this)->blocks()) out.emplace_back(b.data(), b.size());
    return out;
}

template <typename S>
template <typename T>
NetworkParams<T> NetworkParams<S>::cast() const {
    NetworkParams<T> out;
    for (const auto& g : grids) out.grids.push_back(g.template cast<T>());
    for (const auto& w : weights) out.weights.push_back(w.template cast<T>());
    for (const auto& b : biases) out.biases.push_back(b.template cast<T>());
    return out;
}

template <typename S>
NetworkParams<S> NetworkParams<S>::zeros_like() const {
    NetworkParams out;
    for (const auto& g : grids) out.grids.push_back(Mat<S>::Zero(g.rows(), g.cols()));
    for (const auto& w : weights) out.weights.push_back(Mat<S>::Zero(w.rows(), w.cols()));
    for (const auto& b : biases) out.biases.push_back(Col<S>::Zero(b.size()));
    return out;
}

template struct NetworkParams<float>;
template struct NetworkParams<double>;
template NetworkParams<double> NetworkParams<float>::cast<double>() const;
template NetworkParams<float> NetworkParams<double>::cast<float>() const;
template NetworkParams<float> NetworkParams<float>::cast<float>() const;
template NetworkParams<double> NetworkParams<double>::cast<double>() const;

NetworkParams<float> init_params(const EncodingConfig& enc, const MlpShape& shape, std::size_t conditions,
                                 std::uint64_t seed) {
    enc.validate();
    if (shape.hidden_layers < 1 || shape.hidden_width < 1 || shape.outputs < 1)
        throw UsageError("invalid MLP shape");
    Rng rng(seed);
    NetworkParams<float> p;
    for (int l = 0; l < enc.levels(); ++l) {
        Mat<float> g(enc.grid_feature_dim, static_cast<Eigen::Index>(enc.level_nodes(l)));
        for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = static_cast<float>(rng.uniform(-1e-4, 1e-4));
        p.grids.push_back(std::move(g));
    }
    int in = enc.input_dim(conditions);
    for (int i = 0; i <= shape.hidden_layers; ++i) {
        const int out = i < shape.hidden_layers ? shape.hidden_width : shape.outputs;
        const double bound = std::sqrt(6.0 / in);
        Mat<float> w(out, in);
        for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = static_cast<float>(rng.uniform(-bound, bound));
        p.weights.push_back(std::move(w));
        p.biases.push_back(Col<float>::Zero(out));
        in = out;
    }
    return p;
}

template <typename S>
Col<S> grid_encode(const NetworkParams<S>& params, const EncodingConfig& enc, S theta_n, S phi_n, S r_n) {
    const S pos[3] = {theta_n, phi_n, r_n};
    const int f = enc.grid_feature_dim;
    Col<S> out = Col<S>::Zero(enc.grid_dim());
    for (int l = 0; l < enc.levels(); ++l) {
        Corners<S> c;
        level_corners(enc, l, pos, c);
        for (int k = 0; k < 8; ++k)
            for (int q = 0; q < f; ++q) out(l * f + q) += c.w[k] * params.grids[static_cast<std::size_t>(l)](q, c.idx[k]);
    }
    return out;
}

template <typename S>
Mat<S> forward_normalized(const NetworkParams<S>& params, const EncodingConfig& enc, const Mat<S>& inputs) {
    return run_forward<S>(params, enc, inputs, nullptr);
}

template <typename S>
S loss_and_gradients(const NetworkParams<S>& params, const EncodingConfig& enc, const Mat<S>& inputs,
                     const Mat<S>& targets, NetworkParams<S>& grads) {
    if (inputs.cols() < 1) throw UsageError("gradient batch is empty");
    if (targets.cols() != inputs.cols() || targets.rows() != params.weights.back().rows())
        throw UsageError("target shape does not match the batch");
    Tape<S> tape;
    const Mat<S> out = run_forward<S>(params, enc, inputs, &tape);
    if (!out.allFinite()) throw NumericError("non-finite network output");
    const S count = S(out.size());
    Mat<S> dz = (out - targets) * (S(2) / count);
    const S loss = (out - targets).squaredNorm() / count;

    if (grads.weights.size() != params.weights.size()) grads = params.zeros_like();
    const std::size_t layers = params.weights.size();
    for (std::size_t ii = layers; ii-- > 0;) {
        const Mat<S>& h = tape.act[ii];
        grads.weights[ii].noalias() = dz * h.transpose();
        grads.biases[ii] = dz.rowwise().sum();
        if (ii > 0) {
            Mat<S> dh = params.weights[ii].transpose() * dz;
            dz = dh.cwiseProduct((h.array() > S(0)).matrix().template cast<S>());
        } else {
            const Mat<S> dx = params.weights[0].leftCols(enc.grid_dim()).transpose() * dz;
            for (auto& g : grads.grids) g.setZero();
            const int f = enc.grid_feature_dim;
            for (Eigen::Index b = 0; b < inputs.cols(); ++b)
                for (int l = 0; l < enc.levels(); ++l) {
                    const Corners<S>& c = tape.corners[static_cast<std::size_t>(b * enc.levels() + l)];
                    Mat<S>& g = grads.grids[static_cast<std::size_t>(l)];
                    for (int k = 0; k < 8; ++k)
                        for (int q = 0; q < f; ++q) g(q, c.idx[k]) += c.w[k] * dx(l * f + q, b);
                }
        }
    }
    return loss;
}

template Col<float> grid_encode(const NetworkParams<float>&, const EncodingConfig&, float, float, float);
template Col<double> grid_encode(const NetworkParams<double>&, const EncodingConfig&, double, double, double);
template Mat<float> forward_normalized(const NetworkParams<float>&, const EncodingConfig&, const Mat<float>&);
template Mat<double> forward_normalized(const NetworkParams<double>&, const EncodingConfig&, const Mat<double>&);
template float loss_and_gradients(const NetworkParams<float>&, const EncodingConfig&, const Mat<float>&,
                                  const Mat<float>&, NetworkParams<float>&);
template double loss_and_gradients(const NetworkParams<double>&, const EncodingConfig&, const Mat<double>&,
                                   const Mat<double>&, NetworkParams<double>&);

}  // namespace sonofield

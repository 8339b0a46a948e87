#include "sonofield/neural_field.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "sonofield/binary_io.hpp"
#include "sonofield/error.hpp"
#include "sonofield/rng.hpp"

namespace sonofield {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRangeSlack = 1e-9;
constexpr char kMagic[4] = {'S', 'N', 'T', 'F'};

// Inference runs on float with a fixed per-element accumulation order, so a
// column's result never depends on which other columns share its batch.
using v16 = float __attribute__((vector_size(64)));
constexpr int kLanes = 16;
constexpr int kRowTile = 32;
constexpr int kColBlock = 4;

int pad_rows(int rows) { return (rows + kRowTile - 1) / kRowTile * kRowTile; }

inline v16 load16(const float* p) {
    v16 v;
    std::memcpy(&v, p, sizeof v);
    return v;
}
inline void store16(float* p, v16 v) { std::memcpy(p, &v, sizeof v); }
inline v16 relu16(v16 v) { return v > 0.0f ? v : v16{} ; }

// Column-major weights padded to a multiple of kRowTile rows.
struct PackedLayer {
    int rows = 0;    // padded
    int cols = 0;
    std::vector<float> w;
    std::vector<float> b;

    PackedLayer() = default;
    PackedLayer(const Mat<float>& m, const float* bias, int col0, int ncols) : rows(pad_rows(static_cast<int>(m.rows()))), cols(ncols) {
        w.assign(static_cast<std::size_t>(rows) * ncols, 0.0f);
        b.assign(static_cast<std::size_t>(rows), 0.0f);
        for (int k = 0; k < ncols; ++k)
            for (Eigen::Index r = 0; r < m.rows(); ++r) w[static_cast<std::size_t>(k) * rows + r] = m(r, col0 + k);
        if (bias)
            for (Eigen::Index r = 0; r < m.rows(); ++r) b[static_cast<std::size_t>(r)] = bias[r];
    }
};

// acc (rows floats) += W[:, k0..k0+n) x[0..n), in order of k.
void chain(const PackedLayer& l, int k0, int n, const float* x, float* acc) {
    for (int r = 0; r < l.rows; r += kLanes) {
        v16 a = load16(acc + r);
        for (int k = 0; k < n; ++k) a += load16(&l.w[static_cast<std::size_t>(k0 + k) * l.rows + r]) * x[k];
        store16(acc + r, a);
    }
}

// out[j] = act(b + W in[j]) for kColBlock columns; in and out column-major
// with strides in_stride / out_stride.
void dense_block(const PackedLayer& l, const float* in, int in_stride, float* out, int out_stride, bool relu) {
    for (int r = 0; r < l.rows; r += kRowTile) {
        const v16 b0 = load16(&l.b[static_cast<std::size_t>(r)]), b1 = load16(&l.b[static_cast<std::size_t>(r) + kLanes]);
        v16 a[kColBlock][2];
        for (int j = 0; j < kColBlock; ++j) {
            a[j][0] = b0;
            a[j][1] = b1;
        }
        const float* wp = l.w.data() + r;
        for (int k = 0; k < l.cols; ++k, wp += l.rows) {
            const v16 w0 = load16(wp), w1 = load16(wp + kLanes);
            for (int j = 0; j < kColBlock; ++j) {
                const float h = in[j * in_stride + k];
                a[j][0] += w0 * h;
                a[j][1] += w1 * h;
            }
        }
        for (int j = 0; j < kColBlock; ++j) {
            store16(out + j * out_stride + r, relu ? relu16(a[j][0]) : a[j][0]);
            store16(out + j * out_stride + r + kLanes, relu ? relu16(a[j][1]) : a[j][1]);
        }
    }
}

double to_unit(double x, double lo, double hi) { return hi > lo ? (x - lo) / (hi - lo) : 0.0; }

void pe_float(double x, int octaves, float* out) {
    x = std::clamp(x, 0.0, 1.0);
    for (int j = 0; j < octaves; ++j) {
        const double arg = std::ldexp(kPi, j) * x;
        out[2 * j] = static_cast<float>(std::sin(arg));
        out[2 * j + 1] = static_cast<float>(std::cos(arg));
    }
}

}  // namespace

struct NeuralTransferField::Inference {
    int grid_dim = 0;
    int pe_dim = 0;
    int width = 0;  // padded first-layer rows
    PackedLayer grid_part;  // first layer, grid columns, no bias
    PackedLayer cond_part;  // first layer, encoded v and f columns, with bias
    std::vector<PackedLayer> rest;
    int out_rows = 0;

    // z1 pre-activation for one query is grid_acc + cond_acc.
    void grid_acc(const EncodingConfig& enc, const NetworkParams<float>& p, double tn, double pn, double rn, float* acc) const {
        const Col<float> g = grid_encode<float>(p, enc, static_cast<float>(tn), static_cast<float>(pn), static_cast<float>(rn));
        std::fill(acc, acc + width, 0.0f);
        chain(grid_part, 0, grid_dim, g.data(), acc);
    }
    void cond_acc_v(const EncodingConfig& enc, std::span<const double> v, float* acc) const {
        std::copy(cond_part.b.begin(), cond_part.b.end(), acc);
        std::vector<float> pe(static_cast<std::size_t>(pe_dim));
        for (std::size_t d = 0; d < v.size(); ++d) {
            pe_float(v[d], enc.pe_octaves, pe.data());
            chain(cond_part, static_cast<int>(d) * pe_dim, pe_dim, pe.data(), acc);
        }
    }
    void cond_acc_f(const EncodingConfig& enc, std::size_t conditions, double fn, float* acc) const {
        std::vector<float> pe(static_cast<std::size_t>(pe_dim));
        pe_float(fn, enc.pe_octaves, pe.data());
        chain(cond_part, static_cast<int>(conditions) * pe_dim, pe_dim, pe.data(), acc);
    }

    // Runs columns of z1 pre-activations (width floats each, count padded to
    // kColBlock) through the remaining layers; writes out_rows floats per column.
    void finish(std::vector<float>& z1, std::size_t columns, std::vector<float>& out) const {
        const std::size_t padded = (columns + kColBlock - 1) / kColBlock * kColBlock;
        z1.resize(padded * static_cast<std::size_t>(width), 0.0f);
        for (float& x : z1) x = std::max(x, 0.0f);
        out.assign(padded * static_cast<std::size_t>(out_rows), 0.0f);
        const auto blocks = static_cast<std::ptrdiff_t>(padded / kColBlock);
        int max_rows = width;
        for (const PackedLayer& l : rest) max_rows = std::max(max_rows, l.rows);
#pragma omp parallel
        {
            std::vector<float> a(static_cast<std::size_t>(kColBlock * max_rows)), b(a.size());
#pragma omp for schedule(static)
            for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
                const float* in = z1.data() + blk * kColBlock * width;
                int in_stride = width;
                for (std::size_t i = 0; i < rest.size(); ++i) {
                    const bool last = i + 1 == rest.size();
                    float* dst = last ? out.data() + blk * kColBlock * out_rows : (i % 2 ? b.data() : a.data());
                    const int dst_stride = last ? out_rows : max_rows;
                    dense_block(rest[i], in, in_stride, dst, dst_stride, !last);
                    in = dst;
                    in_stride = dst_stride;
                }
            }
        }
    }
};

NeuralTransferField::NeuralTransferField(EncodingConfig enc, MlpShape shape, FieldMeta meta,
                                         NetworkParams<float> params)
    : enc_(std::move(enc)), shape_(shape), meta_(std::move(meta)), params_(std::move(params)) {
    enc_.validate();
    const auto layers = static_cast<std::size_t>(shape_.hidden_layers + 1);
    if (params_.grids.size() != static_cast<std::size_t>(enc_.levels()) || params_.weights.size() != layers ||
        params_.biases.size() != layers)
        throw DataError("parameter tensors do not match the architecture");
    for (int l = 0; l < enc_.levels(); ++l)
        if (params_.grids[static_cast<std::size_t>(l)].rows() != enc_.grid_feature_dim ||
            static_cast<std::size_t>(params_.grids[static_cast<std::size_t>(l)].cols()) != enc_.level_nodes(l))
            throw DataError("grid level " + std::to_string(l) + " has the wrong shape");
    int in = enc_.input_dim(conditions());
    for (std::size_t i = 0; i < layers; ++i) {
        const int out = i + 1 < layers ? shape_.hidden_width : shape_.outputs;
        if (params_.weights[i].rows() != out || params_.weights[i].cols() != in || params_.biases[i].size() != out)
            throw DataError("layer " + std::to_string(i) + " has the wrong shape");
        in = out;
    }
    if (!(meta_.r_max > meta_.r_min) || !(meta_.f_max >= meta_.f_min) || !(meta_.target_scale > 0.0))
        throw DataError("invalid normalization metadata");

    auto inf = std::make_shared<Inference>();
    inf->grid_dim = enc_.grid_dim();
    inf->pe_dim = enc_.pe_dim();
    const Mat<float>& w0 = params_.weights[0];
    inf->grid_part = PackedLayer(w0, nullptr, 0, inf->grid_dim);
    inf->cond_part = PackedLayer(w0, params_.biases[0].data(), inf->grid_dim, static_cast<int>(w0.cols()) - inf->grid_dim);
    inf->width = inf->grid_part.rows;
    for (std::size_t i = 1; i < layers; ++i) {
        inf->rest.emplace_back(params_.weights[i], params_.biases[i].data(), 0, static_cast<int>(params_.weights[i].cols()));
        // Padded rows of the previous layer feed zero columns.
        PackedLayer& l = inf->rest.back();
        const int prev = pad_rows(static_cast<int>(params_.weights[i].cols()));
        l.w.resize(static_cast<std::size_t>(l.rows) * prev, 0.0f);
        l.cols = prev;
    }
    inf->out_rows = inf->rest.back().rows;
    infer_ = std::move(inf);
}

void NeuralTransferField::check_inputs(double theta, double phi, double r, std::span<const double> v, double f) const {
    auto within = [](double x, double lo, double hi) {
        const double slack = kRangeSlack * std::max({1.0, std::abs(lo), std::abs(hi)});
        return std::isfinite(x) && x >= lo - slack && x <= hi + slack;
    };
    if (!within(theta, -kPi, kPi)) throw UsageError("theta out of range [-pi, pi]");
    if (!within(phi, 0.0, kPi)) throw UsageError("phi out of range [0, pi]");
    if (!within(r, meta_.r_min, meta_.r_max))
        throw UsageError("r out of range [" + std::to_string(meta_.r_min) + ", " + std::to_string(meta_.r_max) + "]");
    if (v.size() != conditions())
        throw UsageError("v has " + std::to_string(v.size()) + " values; field expects " + std::to_string(conditions()));
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!within(v[i], 0.0, 1.0)) throw UsageError("v[" + std::to_string(i) + "] out of range [0, 1]");
    if (!within(f, meta_.f_min, meta_.f_max))
        throw UsageError("f out of range [" + std::to_string(meta_.f_min) + ", " + std::to_string(meta_.f_max) + "]");
}

std::vector<double> NeuralTransferField::forward(double theta, double phi, double r, std::span<const double> v,
                                                 double f) const {
    const Query q{theta, phi, r, {v.begin(), v.end()}, f};
    return forward_batch(std::span<const Query>(&q, 1));
}

std::vector<double> NeuralTransferField::forward_batch(std::span<const Query> queries) const {
    const Inference& inf = *infer_;
    const auto w = static_cast<std::size_t>(inf.width);
    std::vector<float> z1(queries.size() * w);
    std::vector<float> cond(w);
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const Query& q = queries[i];
        check_inputs(q.theta, q.phi, q.r, q.v, q.f);
        float* z = z1.data() + i * w;
        inf.grid_acc(enc_, params_, (q.theta + kPi) / (2 * kPi), q.phi / kPi, to_unit(q.r, meta_.r_min, meta_.r_max), z);
        inf.cond_acc_v(enc_, q.v, cond.data());
        inf.cond_acc_f(enc_, conditions(), to_unit(q.f, meta_.f_min, meta_.f_max), cond.data());
        for (std::size_t k = 0; k < w; ++k) z[k] += cond[k];
    }
    std::vector<float> out;
    inf.finish(z1, queries.size(), out);
    const auto d = static_cast<std::size_t>(shape_.outputs);
    std::vector<double> result(queries.size() * d);
    for (std::size_t i = 0; i < queries.size(); ++i)
        for (std::size_t c = 0; c < d; ++c)
            result[i * d + c] = static_cast<double>(out[i * static_cast<std::size_t>(inf.out_rows) + c]) * meta_.target_scale;
    return result;
}

std::vector<float> NeuralTransferField::predict_grid(std::span<const SphericalCoord> listeners,
                                                     std::span<const std::vector<double>> conds,
                                                     std::span<const double> freqs, int channel) const {
    if (!trained()) throw UsageError("field has not been trained");
    if (listeners.size() != conds.size()) throw UsageError("listener and condition tracks differ in length");
    if (channel < 0 || channel >= shape_.outputs) throw UsageError("output channel out of range");
    for (double f : freqs) check_inputs(0.0, 0.0, meta_.r_min, std::vector<double>(conditions(), 0.0), f);
    const Inference& inf = *infer_;
    const auto w = static_cast<std::size_t>(inf.width);
    const std::size_t frames = listeners.size(), bins = freqs.size();
    std::vector<float> z1(frames * bins * w);
    std::vector<float> g(w), cv(w), c(w);
    for (std::size_t t = 0; t < frames; ++t) {
        const SphericalCoord& s = listeners[t];
        check_inputs(s.theta, s.phi, s.r, conds[t], meta_.f_min);
        inf.grid_acc(enc_, params_, s.theta_normalized(), s.phi_normalized(), to_unit(s.r, meta_.r_min, meta_.r_max), g.data());
        inf.cond_acc_v(enc_, conds[t], cv.data());
        for (std::size_t b = 0; b < bins; ++b) {
            c = cv;
            inf.cond_acc_f(enc_, conditions(), to_unit(freqs[b], meta_.f_min, meta_.f_max), c.data());
            float* z = z1.data() + (t * bins + b) * w;
            for (std::size_t k = 0; k < w; ++k) z[k] = g[k] + c[k];
        }
    }
    std::vector<float> out;
    inf.finish(z1, frames * bins, out);
    std::vector<float> result(frames * bins);
    const auto scale = static_cast<float>(meta_.target_scale);
    for (std::size_t i = 0; i < result.size(); ++i)
        result[i] = out[i * static_cast<std::size_t>(inf.out_rows) + static_cast<std::size_t>(channel)] * scale;
    return result;
}

FfatMap NeuralTransferField::predict_map(std::span<const double> v, double f, double r, int width, int height,
                                         int channel) const {
    if (!trained()) throw UsageError("field has not been trained");
    if (width < 2 || height < 2) throw UsageError("FFAT map must be at least 2x2");
    if (channel < 0 || channel >= shape_.outputs) throw UsageError("output channel out of range");
    check_inputs(0.0, 0.0, r, v, f);
    const Inference& inf = *infer_;
    const auto w = static_cast<std::size_t>(inf.width);
    const std::size_t pixels = static_cast<std::size_t>(width) * height;
    std::vector<float> cond(w), z1(pixels * w);
    inf.cond_acc_v(enc_, v, cond.data());
    inf.cond_acc_f(enc_, conditions(), to_unit(f, meta_.f_min, meta_.f_max), cond.data());
    const double rn = to_unit(r, meta_.r_min, meta_.r_max);
    for (int pv = 0; pv < height; ++pv)
        for (int pu = 0; pu < width; ++pu) {
            const double theta = FfatMap::theta_at(pu, width), phi = FfatMap::phi_at(pv, height);
            float* z = z1.data() + (static_cast<std::size_t>(pv) * width + pu) * w;
            inf.grid_acc(enc_, params_, (theta + kPi) / (2 * kPi), phi / kPi, rn, z);
            for (std::size_t k = 0; k < w; ++k) z[k] += cond[k];
        }
    std::vector<float> out;
    inf.finish(z1, pixels, out);
    FfatMap map;
    map.width = width;
    map.height = height;
    map.radius = r;
    map.frequency = f;
    map.origin = meta_.origin;
    map.mode = shape_.outputs > 1 ? channel : -1;
    map.values.resize(pixels);
    for (std::size_t i = 0; i < pixels; ++i)
        map.values[i] = std::max(0.0, static_cast<double>(out[i * static_cast<std::size_t>(inf.out_rows) +
                                                              static_cast<std::size_t>(channel)]) *
                                           meta_.target_scale);
    return map;
}

// ---------------------------------------------------------------------------
// training

namespace {

struct Adam {
    std::vector<std::vector<float>> m, v;
    explicit Adam(const NetworkParams<float>& p) {
        for (const auto& b : p.blocks()) {
            m.emplace_back(b.size(), 0.0f);
            v.emplace_back(b.size(), 0.0f);
        }
    }
    void step(NetworkParams<float>& p, const NetworkParams<float>& g, const TrainConfig& c, double lr, std::size_t t) {
        const auto pb = p.blocks();
        const auto gb = g.blocks();
        const auto b1 = static_cast<float>(c.beta1), b2 = static_cast<float>(c.beta2);
        const auto lr_t = static_cast<float>(lr / (1.0 - std::pow(c.beta1, static_cast<double>(t))));
        const auto inv_bc2 = static_cast<float>(1.0 / std::sqrt(1.0 - std::pow(c.beta2, static_cast<double>(t))));
        const auto eps = static_cast<float>(c.eps);
        const std::size_t first_layer = p.grids.size();
        for (std::size_t k = 0; k < pb.size(); ++k) {
            // biases are not decayed
            const bool decayed = k < first_layer || (k - first_layer) % 2 == 0;
            const float shrink = decayed ? static_cast<float>(1.0 - lr * c.weight_decay) : 1.0f;
            float* __restrict x = pb[k].data();
            const float* __restrict gr = gb[k].data();
            float* __restrict mk = m[k].data();
            float* __restrict vk = v[k].data();
            const std::size_t n = pb[k].size();
            for (std::size_t i = 0; i < n; ++i) {
                mk[i] = b1 * mk[i] + (1.0f - b1) * gr[i];
                vk[i] = b2 * vk[i] + (1.0f - b2) * gr[i] * gr[i];
                x[i] = shrink * x[i] - lr_t * mk[i] / (std::sqrt(vk[i]) * inv_bc2 + eps);
            }
        }
    }
};

double percentile95(const Dataset& data) {
    const std::size_t stride = data.manifest.stride();
    const std::size_t first = stride - static_cast<std::size_t>(data.manifest.outputs);
    std::vector<float> t;
    t.reserve(data.size() * static_cast<std::size_t>(data.manifest.outputs));
    for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t k = first; k < stride; ++k) t.push_back(data.record(i)[k]);
    const std::size_t idx = std::min(t.size() - 1, static_cast<std::size_t>(0.95 * static_cast<double>(t.size())));
    std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(idx), t.end());
    return t[idx] > 0.0f ? t[idx] : 1.0;
}

}  // namespace

NeuralTransferField train(const Dataset& data, const TrainConfig& config) {
    if (config.steps < 1) throw UsageError("training needs steps > 0");
    if (config.batch < 1) throw UsageError("training needs batch >= 1");
    if (!(config.lr > 0.0)) throw UsageError("learning rate must be positive");
    if (!(config.weight_decay >= 0.0)) throw UsageError("weight decay must be >= 0");
    if (data.size() < 1) throw DataError("dataset is empty");
    const DatasetManifest& man = data.manifest;
    if (data.data.size() != data.size() * man.stride()) throw DataError("dataset buffer does not match its manifest");
    MlpShape shape = config.shape;
    shape.outputs = man.outputs;
    const std::size_t n = man.conditions();
    NetworkParams<float> params = init_params(config.encoding, shape, n, config.seed);

    FieldMeta meta;
    meta.scene = man.scene;
    meta.labels = man.labels;
    meta.origin = man.origin;
    meta.r_min = man.r_min;
    meta.r_max = man.r_max;
    meta.f_min = man.f_min;
    meta.f_max = man.f_max;
    meta.target_scale = percentile95(data);
    meta.provenance = man.records_hash;

    const std::size_t in_rows = 4 + n;
    const std::size_t batch = std::min(config.batch, data.size());
    const auto inv_scale = static_cast<float>(1.0 / meta.target_scale);
    Mat<float> inputs(static_cast<Eigen::Index>(in_rows), static_cast<Eigen::Index>(batch));
    Mat<float> targets(man.outputs, static_cast<Eigen::Index>(batch));
    NetworkParams<float> grads = params.zeros_like();
    Adam adam(params);
    Rng rng(mix_seed(config.seed, 1));

    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();
    const std::size_t steps_per_epoch = (data.size() + batch - 1) / batch;
    double epoch_sum = 0.0;
    std::size_t epoch_steps = 0;

    for (std::size_t step = 0; step < config.steps; ++step) {
        for (std::size_t b = 0; b < batch; ++b) {
            if (cursor == order.size()) {
                for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
                cursor = 0;
            }
            const float* rec = data.record(order[cursor++]);
            for (std::size_t k = 0; k < in_rows; ++k) inputs(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(b)) = rec[k];
            for (int c = 0; c < man.outputs; ++c)
                targets(c, static_cast<Eigen::Index>(b)) = rec[in_rows + static_cast<std::size_t>(c)] * inv_scale;
        }
        const float loss = loss_and_gradients<float>(params, config.encoding, inputs, targets, grads);
        if (!std::isfinite(loss))
            throw NumericError("training diverged: non-finite loss at step " + std::to_string(step));
        const int stage = static_cast<int>(3 * step / config.steps);
        const double lr = config.lr * std::pow(config.decay, stage);
        adam.step(params, grads, config, lr, step + 1);
        if (config.on_step) config.on_step(step, loss);
        epoch_sum += loss;
        if (++epoch_steps == steps_per_epoch || step + 1 == config.steps) {
            meta.epoch_loss.push_back(epoch_sum / static_cast<double>(epoch_steps));
            epoch_sum = 0.0;
            epoch_steps = 0;
        }
    }
    meta.steps_trained = config.steps;
    return NeuralTransferField(config.encoding, shape, std::move(meta), std::move(params));
}

// ---------------------------------------------------------------------------
// model file

void NeuralTransferField::save(const std::filesystem::path& path) const {
    const nlohmann::json header{
        {"encoding",
         {{"pe_octaves", enc_.pe_octaves},
          {"grid_resolutions", enc_.grid_resolutions},
          {"grid_feature_dim", enc_.grid_feature_dim},
          {"hashed", enc_.hashed},
          {"hash_table_log2", enc_.hash_table_log2}}},
        {"mlp", {{"hidden_layers", shape_.hidden_layers}, {"hidden_width", shape_.hidden_width}, {"outputs", shape_.outputs}}},
        {"scene", to_json(meta_.scene)},
        {"labels", meta_.labels},
        {"condition_ranges", std::vector<std::array<double, 2>>(meta_.labels.size(), {0.0, 1.0})},
        {"origin", {meta_.origin.x(), meta_.origin.y(), meta_.origin.z()}},
        {"r_range", {meta_.r_min, meta_.r_max}},
        {"f_range", {meta_.f_min, meta_.f_max}},
        {"target_scale", meta_.target_scale},
        {"provenance", meta_.provenance},
        {"steps_trained", meta_.steps_trained},
        {"epoch_loss", meta_.epoch_loss},
        {"parameter_count", params_.size()},
    };
    const std::string text = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(kMagic, sizeof kMagic);
    binio::put<std::uint32_t>(out, kModelVersion);
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& b : params_.blocks())
        for (float x : b) binio::put<float>(out, x);
    if (!out) throw DataError("failed writing " + path.string());
}

NeuralTransferField NeuralTransferField::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw DataError(path.string() + " is not a model file");
    const auto version = binio::get<std::uint32_t>(in, "version");
    if (version != kModelVersion)
        throw DataError("model version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kModelVersion) + ")");
    const auto len = binio::get<std::uint32_t>(in, "header length");
    if (len > (1u << 26)) throw DataError("model header too large");
    std::string text(len, '\0');
    if (!in.read(text.data(), len)) throw DataError("truncated model header");
    nlohmann::json h;
    EncodingConfig enc;
    MlpShape shape;
    FieldMeta meta;
    try {
        h = nlohmann::json::parse(text);
        const auto& e = h.at("encoding");
        enc.pe_octaves = e.at("pe_octaves").get<int>();
        enc.grid_resolutions = e.at("grid_resolutions").get<std::vector<int>>();
        enc.grid_feature_dim = e.at("grid_feature_dim").get<int>();
        enc.hashed = e.at("hashed").get<bool>();
        enc.hash_table_log2 = e.at("hash_table_log2").get<int>();
        const auto& m = h.at("mlp");
        shape.hidden_layers = m.at("hidden_layers").get<int>();
        shape.hidden_width = m.at("hidden_width").get<int>();
        shape.outputs = m.at("outputs").get<int>();
        meta.scene = scene_spec_from_json(h.at("scene"));
        meta.labels = h.at("labels").get<std::vector<std::string>>();
        const auto o = h.at("origin").get<std::vector<double>>();
        if (o.size() != 3) throw DataError("origin must have three entries");
        meta.origin = Vec3(o[0], o[1], o[2]);
        const auto rr = h.at("r_range").get<std::array<double, 2>>();
        const auto fr = h.at("f_range").get<std::array<double, 2>>();
        meta.r_min = rr[0];
        meta.r_max = rr[1];
        meta.f_min = fr[0];
        meta.f_max = fr[1];
        meta.target_scale = h.at("target_scale").get<double>();
        meta.provenance = h.at("provenance").get<std::string>();
        meta.steps_trained = h.at("steps_trained").get<std::size_t>();
        meta.epoch_loss = h.at("epoch_loss").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": bad model header: " + e.what());
    }
    enc.validate();
    if (shape.hidden_layers < 1 || shape.hidden_width < 1 || shape.outputs < 1 || shape.hidden_layers > 64 ||
        shape.hidden_width > 8192)
        throw DataError("invalid MLP shape in model header");
    NetworkParams<float> p = init_params(enc, shape, meta.labels.size(), 0);
    const std::uintmax_t expected = 12 + len + 4 * p.size();
    if (std::filesystem::file_size(path) != expected)
        throw DataError(path.string() + ": file size " + std::to_string(std::filesystem::file_size(path)) +
                        " does not match the declared architecture (" + std::to_string(expected) + " bytes)");
    for (auto& b : p.blocks())
        for (float& x : b) x = binio::get<float>(in, "parameters");
    for (const auto& b : p.blocks())
        for (float x : b)
            if (!std::isfinite(x)) throw DataError(path.string() + ": non-finite parameter");
    return NeuralTransferField(enc, shape, std::move(meta), std::move(p));
}

}  // namespace sonofield

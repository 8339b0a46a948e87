#pragma once

#include "sonofield/neural_field.hpp"

// Small randomly initialized field marked as trained, for plumbing tests.
inline sonofield::NeuralTransferField fixture_field(std::size_t conditions, std::uint64_t seed, double f_min = 10.0,
                                                    double f_max = 8000.0, int outputs = 1) {
    using namespace sonofield;
    EncodingConfig enc;
    enc.pe_octaves = 3;
    enc.grid_resolutions = {4, 8};
    enc.grid_feature_dim = 2;
    const MlpShape shape{2, 32, outputs};
    FieldMeta meta;
    meta.scene.id = "pulsating_sphere";
    for (std::size_t i = 0; i < conditions; ++i) meta.labels.push_back("c" + std::to_string(i));
    meta.r_min = 1.0;
    meta.r_max = 2.0;
    meta.f_min = f_min;
    meta.f_max = f_max;
    meta.target_scale = 1.0;
    meta.steps_trained = 1;
    meta.provenance = "fixture";
    NetworkParams<float> p = init_params(enc, shape, conditions, seed);
    // Positive output bias keeps predictions away from the clamp.
    p.biases.back().setConstant(1.0f);
    return {enc, shape, meta, p};
}

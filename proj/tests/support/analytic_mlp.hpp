#pragma once

#include "organdiff/inr/mlp.hpp"

namespace fixture {

/// Hand-built occupancy MLP with logit sharpness * (radius - s.x |x| - s.y |y| - s.z |z|),
/// s = `axis_scale`: an octahedron centered at `center`, squashed along each axis by s. Layer 1 splits each raw coordinate into its positive
/// and negative parts, layers 2 and 3 pass them through, layer 4 sums.
inline organdiff::inr::MlpParams octahedron_mlp(float radius, float sharpness = 50.0f,
                                                 const organdiff::geometry::Vec3& center = {0, 0, 0},
                                                 const organdiff::geometry::Vec3& axis_scale = {1, 1, 1}) {
    auto p = organdiff::inr::MlpParams::zeros();
    const int raw[3] = {0, 9, 18};
    for (int a = 0; a < 3; ++a) {
        p.weights[0](2 * a, raw[a]) = 1.0f;
        p.biases[0](2 * a) = -static_cast<float>(center[a]);
        p.weights[0](2 * a + 1, raw[a]) = -1.0f;
        p.biases[0](2 * a + 1) = static_cast<float>(center[a]);
    }
    for (int i = 0; i < 6; ++i) {
        p.weights[1](i, i) = 1.0f;
        p.weights[2](i, i) = 1.0f;
        p.weights[3](0, i) = -sharpness * static_cast<float>(axis_scale[i / 2]);
    }
    p.biases[3](0) = sharpness * radius;
    return p;
}

}  // namespace fixture

// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "pcz/pcio.hpp"

namespace pcz {

// Seeded desk-scale scene generator: surface-heavy geometry so local quadric
// structure carries signal for the entropy model.
enum class SceneKind { Plane, Quadric, Sphere, Boxes, Mixed };

SceneKind scene_from_name(const std::string& name);
const char* scene_name(SceneKind kind);

struct SynthParams {
    SceneKind kind = SceneKind::Mixed;
    size_t n_points = 10000;
    double noise = 0.0;        // metres, gaussian, along the surface normal-ish axis
    double extent = 40.0;      // scene cube side, metres
    double patch_scale = 0.25;  // plane/quadric patch size relative to extent
    // Eight beacon points at the stage corners so per-frame bounds equal the
    // extent; keeps the quantization grid stable across a corpus even when a
    // patch covers a small part of the stage. Applied to plane/quadric scenes
    // (the others span the stage on their own).
    bool corner_markers = true;
};

PointCloud synth_scene(const SynthParams& params, Rng& rng);

}  // namespace pcz

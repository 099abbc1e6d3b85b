// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#include "pcz/synth.hpp"

#include <algorithm>
#include <cmath>

namespace pcz {

SceneKind scene_from_name(const std::string& name) {
    if (name == "plane") return SceneKind::Plane;
    if (name == "quadric") return SceneKind::Quadric;
    if (name == "sphere") return SceneKind::Sphere;
    if (name == "boxes") return SceneKind::Boxes;
    if (name == "mixed") return SceneKind::Mixed;
    throw ValidationError("unknown scene '" + name + "' (plane|quadric|sphere|boxes|mixed)");
}

const char* scene_name(SceneKind kind) {
    switch (kind) {
        case SceneKind::Plane: return "plane";
        case SceneKind::Quadric: return "quadric";
        case SceneKind::Sphere: return "sphere";
        case SceneKind::Boxes: return "boxes";
        case SceneKind::Mixed: return "mixed";
    }
    return "?";
}

namespace {

void push_clamped(PointCloud& cloud, double extent, double x, double y, double z) {
    const float hi = std::nextafter(float(extent), 0.0f);
    auto cl = [&](double v) { return std::min(std::max(float(v), 0.0f), hi); };
    cloud.pts.push_back(Vec3f{cl(x), cl(y), cl(z)});
}

// Height-field patch z = q[0]u^2 + q[1]v^2 + q[2]uv + q[3]u + q[4]v + z0 in
// patch-local (u,v); plane scenes zero the curvature terms.
void add_patch(PointCloud& cloud, const SynthParams& p, Rng& rng, size_t n, bool curved) {
    const double s = std::max(p.extent * p.patch_scale, 1e-6);
    const double margin = 0.3 * p.extent;
    const double cx = rng.uniform(margin, p.extent - margin);
    const double cy = rng.uniform(margin, p.extent - margin);
    const double z0 = rng.uniform(margin, p.extent - margin);
    double q[5] = {0, 0, 0, rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
    if (curved) {
        const double kmax = 1.2 / s;
        q[0] = rng.uniform(-kmax, kmax);
        q[1] = rng.uniform(-kmax, kmax);
        q[2] = rng.uniform(-kmax, kmax);
    }
    for (size_t i = 0; i < n; ++i) {
        const double u = rng.uniform(-0.5 * s, 0.5 * s);
        const double v = rng.uniform(-0.5 * s, 0.5 * s);
        const double z = z0 + q[0] * u * u + q[1] * v * v + q[2] * u * v + q[3] * u + q[4] * v +
                         p.noise * rng.normal();
        push_clamped(cloud, p.extent, cx + u, cy + v, z);
    }
}

void add_sphere(PointCloud& cloud, const SynthParams& p, Rng& rng, size_t n) {
    const double r = rng.uniform(0.12, 0.3) * p.extent;
    const double m = r + 0.05 * p.extent;
    const double cx = rng.uniform(m, p.extent - m);
    const double cy = rng.uniform(m, p.extent - m);
    const double cz = rng.uniform(m, p.extent - m);
    for (size_t i = 0; i < n; ++i) {
        double dx, dy, dz, len;
        do {
            dx = rng.normal();
            dy = rng.normal();
            dz = rng.normal();
            len = std::sqrt(dx * dx + dy * dy + dz * dz);
        } while (len < 1e-9);
        const double rr = r + p.noise * rng.normal();
        push_clamped(cloud, p.extent, cx + rr * dx / len, cy + rr * dy / len, cz + rr * dz / len);
    }
}

void add_boxes(PointCloud& cloud, const SynthParams& p, Rng& rng, size_t n) {
    const int boxes = 1 + int(rng.below(3));
    for (int b = 0; b < boxes; ++b) {
        const size_t share = n / size_t(boxes) + (size_t(b) < n % size_t(boxes) ? 1 : 0);
        const double hx = rng.uniform(0.05, 0.18) * p.extent;
        const double hy = rng.uniform(0.05, 0.18) * p.extent;
        const double hz = rng.uniform(0.05, 0.18) * p.extent;
        const double m = std::max({hx, hy, hz}) + 0.05 * p.extent;
        const double cx = rng.uniform(m, p.extent - m);
        const double cy = rng.uniform(m, p.extent - m);
        const double cz = rng.uniform(m, p.extent - m);
        for (size_t i = 0; i < share; ++i) {
            const int face = int(rng.below(6));
            double u = rng.uniform(-1.0, 1.0), v = rng.uniform(-1.0, 1.0);
            double x = cx, y = cy, z = cz;
            const double off = p.noise * rng.normal();
            switch (face) {
                case 0: x += hx + off; y += u * hy; z += v * hz; break;
                case 1: x += -hx + off; y += u * hy; z += v * hz; break;
                case 2: y += hy + off; x += u * hx; z += v * hz; break;
                case 3: y += -hy + off; x += u * hx; z += v * hz; break;
                case 4: z += hz + off; x += u * hx; y += v * hy; break;
                default: z += -hz + off; x += u * hx; y += v * hy; break;
            }
            push_clamped(cloud, p.extent, x, y, z);
        }
    }
}

}  // namespace

namespace {

void add_corner_markers(PointCloud& cloud, double extent) {
    const float hi = std::nextafter(float(extent), 0.0f);
    for (int k = 0; k < 8; ++k)
        cloud.pts.push_back(Vec3f{(k & 4) ? hi : 0.0f, (k & 2) ? hi : 0.0f, (k & 1) ? hi : 0.0f});
}

}  // namespace

PointCloud synth_scene(const SynthParams& params, Rng& rng) {
    if (params.n_points < 1) throw ValidationError("synth: need at least one point");
    PointCloud cloud;
    cloud.pts.reserve(params.n_points + 8);
    const bool markers =
        params.corner_markers && (params.kind == SceneKind::Plane || params.kind == SceneKind::Quadric);
    if (markers) add_corner_markers(cloud, params.extent);
    switch (params.kind) {
        case SceneKind::Plane: add_patch(cloud, params, rng, params.n_points, false); break;
        case SceneKind::Quadric: add_patch(cloud, params, rng, params.n_points, true); break;
        case SceneKind::Sphere: add_sphere(cloud, params, rng, params.n_points); break;
        case SceneKind::Boxes: add_boxes(cloud, params, rng, params.n_points); break;
        case SceneKind::Mixed: {
            const size_t a = params.n_points / 2;
            const size_t b = params.n_points / 4;
            const size_t c = params.n_points - a - b;
            add_patch(cloud, params, rng, a, rng.below(2) == 0);
            add_sphere(cloud, params, rng, b);
            add_boxes(cloud, params, rng, c);
            break;
        }
    }
    return cloud;
}

}  // namespace pcz

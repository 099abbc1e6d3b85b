// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "pcz/octree.hpp"
#include "pcz/pcio.hpp"

namespace pcz {

// Exact nearest-neighbour queries over a uniform grid (never approximate;
// results must be reproducible bit for bit). Ties resolve to the lowest
// original point index.
class NnGrid {
public:
    explicit NnGrid(const PointCloud& cloud);

    struct Hit {
        double d2 = 0.0;
        size_t index = SIZE_MAX;
    };

    Hit nearest(const Vec3f& q) const;
    std::vector<Hit> knearest(const Vec3f& q, int k) const;  // ascending (d2, index)
    size_t size() const { return n_; }

private:
    size_t cell_of(int cx, int cy, int cz) const;

    size_t n_ = 0;
    int dims_ = 1;
    double cell_ = 1.0;
    Vec3d lo_;
    std::vector<uint32_t> cell_start_;
    std::vector<uint32_t> order_;          // original indices, cell-major
    std::vector<float> px_, py_, pz_;      // reordered SoA
};

// Directed mean Euclidean nearest-neighbour distance from a to b.
double chamfer_directed(const PointCloud& a, const PointCloud& b);
double cd_max(const PointCloud& a, const PointCloud& b);

inline constexpr double kPsnrPeak = 59.70;  // metres

// Raw geometry cost: three 32-bit coordinates per point.
inline constexpr uint64_t kUncompressedBitsPerPoint = 96;

struct PsnrResult {
    double db = 0.0;
    bool infinite = false;  // zero error; reported as a sentinel, never clamped
    int plane_fallbacks = 0;  // points scored point-to-point for lack of a normal
};

PsnrResult psnr_point(const PointCloud& ref, const PointCloud& test, double peak = kPsnrPeak);
PsnrResult psnr_plane(const PointCloud& ref, const PointCloud& test, double peak = kPsnrPeak, int k_normals = 12);

double f1_score(const PointCloud& ref, const PointCloud& test, double tau = 0.02);

// Per-point unit normals from a plane fit over the k nearest neighbours.
// Returns false per point when the neighbourhood is degenerate.
struct NormalField {
    std::vector<Vec3f> normals;
    std::vector<uint8_t> valid;
};
NormalField estimate_normals(const PointCloud& cloud, int k);

struct JsMatrix {
    int levels = 0;
    std::vector<double> m;        // levels x levels, bits
    std::vector<uint8_t> flagged;  // level had no symbols

    double at(int a, int b) const { return m[size_t(a) * levels + b]; }
};

JsMatrix js_divergence_by_level(const std::vector<const Octree*>& trees);

struct MetricsReport {
    double bpp = -1.0;  // negative when no rate information was supplied
    PsnrResult psnr_pt;
    PsnrResult psnr_pl;
    double f1 = 0.0;
    double cd = 0.0;
    std::vector<std::array<uint64_t, 256>> level_histograms;

    std::string to_kv() const;
    static std::string csv_header();
    std::string to_csv_row(const std::string& name) const;
};

MetricsReport evaluate_clouds(const PointCloud& ref, const PointCloud& test);

}  // namespace pcz

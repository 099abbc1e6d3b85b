// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "pcz/common.hpp"

namespace pcz {

struct PointCloud {
    std::vector<Vec3f> pts;

    size_t size() const { return pts.size(); }
    bool empty() const { return pts.empty(); }
};

// Axis-aligned cube; points live in [origin, origin + side) per axis so every
// point maps to exactly one octree cell.
struct BoundingCube {
    Vec3d origin;
    double side = 0.0;

    bool contains(const Vec3f& p) const {
        return double(p.x) >= origin.x && double(p.x) < origin.x + side && double(p.y) >= origin.y &&
               double(p.y) < origin.y + side && double(p.z) >= origin.z && double(p.z) < origin.z + side;
    }
};

enum class CloudFormat { KittiBin, Ply, Xyz };

// Picks a format from the file extension (.bin/.ply/.xyz).
CloudFormat format_from_path(const std::string& path);
const char* format_name(CloudFormat f);

// Geometry only: attribute channels (kitti intensity, extra ply properties)
// are dropped on load. Throws FormatError / IoError with file context.
PointCloud load_points(const std::string& path, CloudFormat format);
PointCloud load_points(const std::string& path);

// ply is written binary_little_endian, xyz as shortest-exact decimal text;
// both reload bit-exactly.
void save_points(const PointCloud& cloud, const std::string& path, CloudFormat format);
void save_points(const PointCloud& cloud, const std::string& path);

// Cubical bounds with side = max axis extent * (1 + padding), nudged so all
// points satisfy the closed-open convention. All points identical degenerates
// to side = max(padding, float epsilon).
BoundingCube compute_bounds(const PointCloud& cloud, double padding);

}  // namespace pcz

// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#include "pcz/pcio.hpp"

#include <algorithm>
#include <bit>
#include <cfloat>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

static_assert(std::endian::native == std::endian::little, "wire formats assume a little-endian host");

namespace pcz {

namespace {

namespace fs = std::filesystem;

std::string lower_ext(const std::string& path) {
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return {};
    std::string e = path.substr(dot + 1);
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    return e;
}

void check_finite(const Vec3f& p, const std::string& path, size_t index) {
    if (!is_finite(p))
        throw FormatError(path + ": non-finite coordinate at point " + std::to_string(index));
}

std::ifstream open_in(const std::string& path, bool binary) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

std::ofstream open_out(const std::string& path, bool binary) {
    fs::path p(path);
    if (p.has_parent_path() && !fs::exists(p.parent_path()))
        throw IoError("output directory does not exist: " + p.parent_path().string());
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw IoError("cannot open " + path + " for writing");
    return out;
}

PointCloud load_kitti_bin(const std::string& path) {
    std::ifstream in = open_in(path, true);
    in.seekg(0, std::ios::end);
    const uint64_t bytes = uint64_t(in.tellg());
    in.seekg(0);
    if (bytes % 16 != 0)
        throw FormatError(path + ": size " + std::to_string(bytes) +
                          " is not a multiple of 16 (x,y,z,intensity float records); trailing garbage at byte offset " +
                          std::to_string(bytes - bytes % 16));
    PointCloud cloud;
    cloud.pts.reserve(bytes / 16);
    float rec[4];
    size_t i = 0;
    while (in.read(reinterpret_cast<char*>(rec), 16)) {
        Vec3f p{rec[0], rec[1], rec[2]};  // intensity dropped
        check_finite(p, path, i++);
        cloud.pts.push_back(p);
    }
    return cloud;
}

PointCloud load_xyz(const std::string& path) {
    std::ifstream in = open_in(path, false);
    PointCloud cloud;
    std::string line;
    size_t offset = 0;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const char* b = line.data();
        const char* e = b + line.size();
        const char* c = b;
        float v[3];
        int got = 0;
        while (got < 3) {
            while (c < e && (*c == ' ' || *c == '\t' || *c == '\r')) ++c;
            if (c == e) break;
            auto [next, ec] = std::from_chars(c, e, v[got]);
            if (ec != std::errc())
                throw FormatError(path + ": bad number on line " + std::to_string(lineno) + " (byte offset " +
                                  std::to_string(offset + size_t(c - b)) + ")");
            c = next;
            ++got;
        }
        while (c < e && (*c == ' ' || *c == '\t' || *c == '\r')) ++c;
        if (got == 0 && c == e) {
            offset += line.size() + 1;
            continue;  // blank line
        }
        if (got != 3 || c != e)
            throw FormatError(path + ": expected three coordinates on line " + std::to_string(lineno) +
                              " (byte offset " + std::to_string(offset) + ")");
        Vec3f p{v[0], v[1], v[2]};
        check_finite(p, path, cloud.size());
        cloud.pts.push_back(p);
        offset += line.size() + 1;
    }
    return cloud;
}

struct PlyProperty {
    std::string type;
    std::string name;
    size_t size;
};

size_t ply_type_size(const std::string& t, const std::string& path) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    throw FormatError(path + ": unsupported ply property type '" + t + "'");
}

PointCloud load_ply(const std::string& path) {
    std::ifstream in = open_in(path, true);
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty file");
    if (line == "ply\r") line = "ply";
    if (line != "ply") throw FormatError(path + ": missing ply magic at byte offset 0");

    bool binary = false;
    size_t vertex_count = 0;
    std::vector<PlyProperty> props;
    bool in_vertex = false;
    bool seen_vertex = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment" || tok == "obj_info" || tok.empty()) continue;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "binary_little_endian")
                binary = true;
            else if (fmt == "ascii")
                binary = false;
            else
                throw FormatError(path + ": unsupported ply format '" + fmt + "'");
        } else if (tok == "element") {
            std::string name;
            size_t count = 0;
            ls >> name >> count;
            if (name == "vertex") {
                vertex_count = count;
                in_vertex = true;
                seen_vertex = true;
            } else {
                if (seen_vertex && count > 0 && binary) {
                    // vertex data precedes it; extra elements afterwards are ignorable
                }
                if (!seen_vertex && count > 0)
                    throw FormatError(path + ": element '" + name + "' before vertex data is not supported");
                in_vertex = false;
            }
        } else if (tok == "property") {
            if (!in_vertex) continue;
            std::string type;
            ls >> type;
            if (type == "list") throw FormatError(path + ": list properties in the vertex element are not supported");
            std::string name;
            ls >> name;
            props.push_back({type, name, ply_type_size(type, path)});
        } else if (tok == "end_header") {
            break;
        }
    }
    if (!seen_vertex) throw FormatError(path + ": no vertex element");

    int ix = -1, iy = -1, iz = -1;
    size_t stride = 0;
    std::vector<size_t> offsets(props.size());
    for (size_t i = 0; i < props.size(); ++i) {
        offsets[i] = stride;
        stride += props[i].size;
        if (props[i].name == "x") ix = int(i);
        if (props[i].name == "y") iy = int(i);
        if (props[i].name == "z") iz = int(i);
    }
    if (ix < 0 || iy < 0 || iz < 0) throw FormatError(path + ": vertex element lacks x/y/z properties");

    PointCloud cloud;
    cloud.pts.reserve(vertex_count);
    auto read_coord = [&](const char* base, int pi) -> float {
        const PlyProperty& pr = props[size_t(pi)];
        const char* src = base + offsets[size_t(pi)];
        if (pr.type == "float" || pr.type == "float32") {
            float f;
            std::memcpy(&f, src, 4);
            return f;
        }
        if (pr.type == "double" || pr.type == "float64") {
            double d;
            std::memcpy(&d, src, 8);
            return float(d);
        }
        throw FormatError(path + ": x/y/z must be float or double, got '" + pr.type + "'");
    };

    if (binary) {
        std::vector<char> row(stride);
        for (size_t v = 0; v < vertex_count; ++v) {
            if (!in.read(row.data(), std::streamsize(stride)))
                throw FormatError(path + ": truncated vertex data at vertex " + std::to_string(v));
            Vec3f p{read_coord(row.data(), ix), read_coord(row.data(), iy), read_coord(row.data(), iz)};
            check_finite(p, path, v);
            cloud.pts.push_back(p);
        }
    } else {
        for (size_t v = 0; v < vertex_count; ++v) {
            if (!std::getline(in, line)) throw FormatError(path + ": truncated vertex data at vertex " + std::to_string(v));
            std::istringstream ls(line);
            std::vector<double> vals(props.size());
            for (size_t i = 0; i < props.size(); ++i)
                if (!(ls >> vals[i]))
                    throw FormatError(path + ": bad vertex line at vertex " + std::to_string(v));
            Vec3f p{float(vals[size_t(ix)]), float(vals[size_t(iy)]), float(vals[size_t(iz)])};
            check_finite(p, path, v);
            cloud.pts.push_back(p);
        }
    }
    return cloud;
}

void append_exact(std::string& out, float v) {
    char buf[48];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    out.append(buf, end);
}

}  // namespace

CloudFormat format_from_path(const std::string& path) {
    std::string e = lower_ext(path);
    if (e == "bin") return CloudFormat::KittiBin;
    if (e == "ply") return CloudFormat::Ply;
    if (e == "xyz" || e == "txt") return CloudFormat::Xyz;
    throw ValidationError("cannot infer point cloud format from '" + path + "' (expected .bin/.ply/.xyz)");
}

const char* format_name(CloudFormat f) {
    switch (f) {
        case CloudFormat::KittiBin: return "kitti-bin";
        case CloudFormat::Ply: return "ply";
        case CloudFormat::Xyz: return "xyz";
    }
    return "?";
}

PointCloud load_points(const std::string& path, CloudFormat format) {
    PointCloud cloud;
    switch (format) {
        case CloudFormat::KittiBin: cloud = load_kitti_bin(path); break;
        case CloudFormat::Ply: cloud = load_ply(path); break;
        case CloudFormat::Xyz: cloud = load_xyz(path); break;
    }
    if (cloud.empty()) throw FormatError(path + ": empty point cloud");
    return cloud;
}

PointCloud load_points(const std::string& path) { return load_points(path, format_from_path(path)); }

void save_points(const PointCloud& cloud, const std::string& path, CloudFormat format) {
    switch (format) {
        case CloudFormat::KittiBin:
            throw ValidationError("kitti-bin output is not supported (intensity channel would be fabricated)");
        case CloudFormat::Ply: {
            std::ofstream out = open_out(path, true);
            std::string header;
            header += "ply\n";
            header += "format binary_little_endian 1.0\n";
            header += "element vertex " + std::to_string(cloud.size()) + "\n";
            header += "property float x\nproperty float y\nproperty float z\n";
            header += "end_header\n";
            out.write(header.data(), std::streamsize(header.size()));
            for (const Vec3f& p : cloud.pts) {
                float xyz[3] = {p.x, p.y, p.z};
                out.write(reinterpret_cast<const char*>(xyz), 12);
            }
            if (!out) throw IoError("write failed: " + path);
            break;
        }
        case CloudFormat::Xyz: {
            std::ofstream out = open_out(path, false);
            std::string buf;
            buf.reserve(cloud.size() * 24);
            for (const Vec3f& p : cloud.pts) {
                append_exact(buf, p.x);
                buf.push_back(' ');
                append_exact(buf, p.y);
                buf.push_back(' ');
                append_exact(buf, p.z);
                buf.push_back('\n');
            }
            out.write(buf.data(), std::streamsize(buf.size()));
            if (!out) throw IoError("write failed: " + path);
            break;
        }
    }
}

void save_points(const PointCloud& cloud, const std::string& path) {
    save_points(cloud, path, format_from_path(path));
}

BoundingCube compute_bounds(const PointCloud& cloud, double padding) {
    if (cloud.empty()) throw ValidationError("compute_bounds: empty cloud");
    if (padding < 0.0) throw ValidationError("compute_bounds: negative padding");
    Vec3d lo{DBL_MAX, DBL_MAX, DBL_MAX};
    Vec3d hi{-DBL_MAX, -DBL_MAX, -DBL_MAX};
    for (const Vec3f& p : cloud.pts) {
        lo.x = std::min(lo.x, double(p.x));
        lo.y = std::min(lo.y, double(p.y));
        lo.z = std::min(lo.z, double(p.z));
        hi.x = std::max(hi.x, double(p.x));
        hi.y = std::max(hi.y, double(p.y));
        hi.z = std::max(hi.z, double(p.z));
    }
    double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
    BoundingCube cube;
    cube.origin = lo;
    if (extent == 0.0) {
        cube.side = std::max(padding, double(FLT_EPSILON));
        return cube;
    }
    cube.side = extent * (1.0 + padding);
    // closed-open: nudge until the max corner is strictly inside on all axes
    const double inf = std::numeric_limits<double>::infinity();
    const double his[3] = {hi.x, hi.y, hi.z};
    const double los[3] = {lo.x, lo.y, lo.z};
    for (int a = 0; a < 3; ++a) {
        while (los[a] + cube.side <= his[a]) {
            double grown = std::nextafter(los[a] + cube.side, inf) - los[a];
            cube.side = grown > cube.side ? grown : std::nextafter(cube.side, inf);
        }
    }
    return cube;
}

}  // namespace pcz

// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pcz {

// Error taxonomy; the CLI maps these to exit codes (validation=1, io=2,
// anything else=3).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct FormatError : IoError {
    using IoError::IoError;
};
struct InternalError : Error {
    using Error::Error;
};

struct Vec3f {
    float x = 0.0f, y = 0.0f, z = 0.0f;
};

struct Vec3d {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3d() = default;
    Vec3d(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}
    explicit Vec3d(const Vec3f& v) : x(v.x), y(v.y), z(v.z) {}
};

inline bool is_finite(const Vec3f& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

// splitmix64. Every random draw in the project goes through this so runs are
// reproducible from a single seed, independent of the standard library.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // [0,1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    uint64_t below(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Independent substream; handy for per-frame / per-module generators.
    Rng fork(uint64_t stream) {
        Rng r(state_ ^ (0x9e3779b97f4a7c15ULL * (stream + 0x51ed2701)));
        r.next_u64();
        return r;
    }

private:
    uint64_t state_;
};

}  // namespace pcz

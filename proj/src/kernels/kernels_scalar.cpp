// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#include <limits>

#include "pcz/kernels.hpp"

namespace pcz::kernels {

namespace {

double dot_wf32_xf64_scalar(const float* w, const double* x, size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    for (size_t i = 0; i < n; ++i) acc[i & 3] += double(w[i]) * x[i];
    return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

void axpy_wf32_scalar(double a, const float* w, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a * double(w[i]);
}

void axpy_f64_scalar(double a, const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void nn_best_f32_scalar(float qx, float qy, float qz, const float* px, const float* py, const float* pz, size_t n,
                        double* best_d2, size_t* best_idx) {
    const double inf = std::numeric_limits<double>::infinity();
    double ld[4] = {inf, inf, inf, inf};
    size_t li[4] = {SIZE_MAX, SIZE_MAX, SIZE_MAX, SIZE_MAX};
    const double qxd = double(qx), qyd = double(qy), qzd = double(qz);
    for (size_t i = 0; i < n; ++i) {
        double dx = qxd - double(px[i]);
        double dy = qyd - double(py[i]);
        double dz = qzd - double(pz[i]);
        double d2 = (dx * dx + dy * dy) + dz * dz;
        size_t l = i & 3;
        if (d2 < ld[l]) {
            ld[l] = d2;
            li[l] = i;
        }
    }
    double bd = inf;
    size_t bi = SIZE_MAX;
    for (int l = 0; l < 4; ++l) {
        if (ld[l] < bd || (ld[l] == bd && li[l] < bi)) {
            bd = ld[l];
            bi = li[l];
        }
    }
    *best_d2 = bd;
    *best_idx = bi;
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops{"scalar", dot_wf32_xf64_scalar, axpy_wf32_scalar, axpy_f64_scalar, nn_best_f32_scalar};
    return ops;
}

}  // namespace pcz::kernels

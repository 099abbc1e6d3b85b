// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

// Compiled with -mavx2 only; dispatch gates entry on a runtime CPU check.
// Lane layout mirrors the scalar reference exactly (see kernels.hpp), and the
// intrinsics are plain mul/add so per-lane IEEE results match bit for bit.

#include <immintrin.h>

#include <limits>

#include "pcz/kernels.hpp"

namespace pcz::kernels {

namespace {

double dot_wf32_xf64_avx2(const float* w, const double* x, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t n4 = n & ~size_t(3);
    for (size_t i = 0; i < n4; i += 4) {
        __m256d wv = _mm256_cvtps_pd(_mm_loadu_ps(w + i));
        __m256d xv = _mm256_loadu_pd(x + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(wv, xv));
    }
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    for (size_t i = n4; i < n; ++i) lane[i & 3] += double(w[i]) * x[i];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

void axpy_wf32_avx2(double a, const float* w, double* y, size_t n) {
    __m256d av = _mm256_set1_pd(a);
    size_t n4 = n & ~size_t(3);
    for (size_t i = 0; i < n4; i += 4) {
        __m256d wv = _mm256_cvtps_pd(_mm_loadu_ps(w + i));
        __m256d yv = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(yv, _mm256_mul_pd(av, wv)));
    }
    for (size_t i = n4; i < n; ++i) y[i] += a * double(w[i]);
}

void axpy_f64_avx2(double a, const double* x, double* y, size_t n) {
    __m256d av = _mm256_set1_pd(a);
    size_t n4 = n & ~size_t(3);
    for (size_t i = 0; i < n4; i += 4) {
        __m256d xv = _mm256_loadu_pd(x + i);
        __m256d yv = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(yv, _mm256_mul_pd(av, xv)));
    }
    for (size_t i = n4; i < n; ++i) y[i] += a * x[i];
}

void nn_best_f32_avx2(float qx, float qy, float qz, const float* px, const float* py, const float* pz, size_t n,
                      double* best_d2, size_t* best_idx) {
    const double inf = std::numeric_limits<double>::infinity();
    const double qxd = double(qx), qyd = double(qy), qzd = double(qz);
    __m256d bd = _mm256_set1_pd(inf);
    __m256i bi = _mm256_set1_epi64x(int64_t(-1));
    __m256i idx = _mm256_setr_epi64x(0, 1, 2, 3);
    const __m256i step = _mm256_set1_epi64x(4);
    const __m256d qxv = _mm256_set1_pd(qxd);
    const __m256d qyv = _mm256_set1_pd(qyd);
    const __m256d qzv = _mm256_set1_pd(qzd);
    size_t n4 = n & ~size_t(3);
    for (size_t i = 0; i < n4; i += 4) {
        __m256d dx = _mm256_sub_pd(qxv, _mm256_cvtps_pd(_mm_loadu_ps(px + i)));
        __m256d dy = _mm256_sub_pd(qyv, _mm256_cvtps_pd(_mm_loadu_ps(py + i)));
        __m256d dz = _mm256_sub_pd(qzv, _mm256_cvtps_pd(_mm_loadu_ps(pz + i)));
        __m256d d2 = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)), _mm256_mul_pd(dz, dz));
        __m256d lt = _mm256_cmp_pd(d2, bd, _CMP_LT_OQ);
        bd = _mm256_blendv_pd(bd, d2, lt);
        bi = _mm256_blendv_epi8(bi, idx, _mm256_castpd_si256(lt));
        idx = _mm256_add_epi64(idx, step);
    }
    alignas(32) double ld[4];
    alignas(32) int64_t lis[4];
    _mm256_store_pd(ld, bd);
    _mm256_store_si256(reinterpret_cast<__m256i*>(lis), bi);
    size_t li[4] = {size_t(lis[0]), size_t(lis[1]), size_t(lis[2]), size_t(lis[3])};
    for (size_t i = n4; i < n; ++i) {
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
    double outd = inf;
    size_t outi = SIZE_MAX;
    for (int l = 0; l < 4; ++l) {
        if (ld[l] < outd || (ld[l] == outd && li[l] < outi)) {
            outd = ld[l];
            outi = li[l];
        }
    }
    *best_d2 = outd;
    *best_idx = outi;
}

}  // namespace

const Ops& avx2_ops_impl() {
    static const Ops ops{"avx2", dot_wf32_xf64_avx2, axpy_wf32_avx2, axpy_f64_avx2, nn_best_f32_avx2};
    return ops;
}

}  // namespace pcz::kernels

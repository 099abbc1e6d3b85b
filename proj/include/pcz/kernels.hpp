// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace pcz::kernels {

// Hot arithmetic loops (dense/conv inner products, gradient axpys, nearest-
// neighbour scans) are implemented twice: a scalar reference and an AVX2
// variant, selected at runtime. Every implementation follows one summation
// contract so results are bit-identical across variants:
//
//   * reductions keep four independent f64 accumulators, element i goes to
//     lane (i & 3), and the final combine is (l0 + l1) + (l2 + l3);
//   * products are f64 multiply then add, never fused (-ffp-contract=off);
//   * nn_best keeps a per-lane running minimum with strict '<' updates and
//     resolves lanes by (distance, index), so ties pick the lowest index.
//
// Encode and decode therefore agree no matter which variant either side
// happens to select, and the equivalence tests assert exact equality.

struct Ops {
    const char* name;
    double (*dot_wf32_xf64)(const float* w, const double* x, size_t n);
    void (*axpy_wf32)(double a, const float* w, double* y, size_t n);
    void (*axpy_f64)(double a, const double* x, double* y, size_t n);
    void (*nn_best_f32)(float qx, float qy, float qz, const float* px, const float* py, const float* pz, size_t n,
                        double* best_d2, size_t* best_idx);
};

const Ops& scalar_ops();
const Ops* avx2_ops_or_null();  // null when not built or CPU lacks AVX2

// Implementations usable on this machine; scalar is always present.
std::vector<const Ops*> available();

// Active implementation. Defaults to the widest supported variant; the
// PCZ_KERNELS environment variable ("scalar", "avx2") overrides at startup.
const Ops& active();
bool select(std::string_view name);

}  // namespace pcz::kernels

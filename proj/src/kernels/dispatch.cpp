// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <string>

#include "pcz/kernels.hpp"

namespace pcz::kernels {

#if defined(PCZ_HAVE_AVX2)
const Ops& avx2_ops_impl();
#endif

const Ops* avx2_ops_or_null() {
#if defined(PCZ_HAVE_AVX2)
    if (__builtin_cpu_supports("avx2")) return &avx2_ops_impl();
#endif
    return nullptr;
}

std::vector<const Ops*> available() {
    std::vector<const Ops*> v{&scalar_ops()};
    if (const Ops* a = avx2_ops_or_null()) v.push_back(a);
    return v;
}

namespace {

const Ops* pick_default() {
    if (const char* env = std::getenv("PCZ_KERNELS")) {
        std::string want(env);
        for (const Ops* o : available())
            if (want == o->name) return o;
        // unknown names fall through to autodetect
    }
    if (const Ops* a = avx2_ops_or_null()) return a;
    return &scalar_ops();
}

std::atomic<const Ops*>& slot() {
    static std::atomic<const Ops*> s{pick_default()};
    return s;
}

}  // namespace

const Ops& active() { return *slot().load(std::memory_order_relaxed); }

bool select(std::string_view name) {
    for (const Ops* o : available()) {
        if (name == o->name) {
            slot().store(o, std::memory_order_relaxed);
            return true;
        }
    }
    return false;
}

}  // namespace pcz::kernels

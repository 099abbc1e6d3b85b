// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pcz/common.hpp"

namespace pcz {

// Minimal deterministic compute substrate. Parameters are stored f32 with
// f64 gradients; activations and all accumulation run in f64 with a fixed
// summation order (see kernels.hpp), so identical inputs give bit-identical
// outputs across runs of one build.

struct Param {
    std::string name;
    std::vector<int> shape;
    std::vector<float> w;
    std::vector<double> g;
    int id = -1;

    size_t size() const { return w.size(); }
};

class ParamRegistry {
public:
    void add(Param& p);
    Param& at(int id) { return *list_[size_t(id)]; }
    const Param& at(int id) const { return *list_[size_t(id)]; }
    const std::vector<Param*>& list() const { return list_; }
    size_t count() const { return list_.size(); }
    size_t total_values() const;
    void zero_grads();
    std::vector<std::vector<float>> snapshot() const;
    void restore(const std::vector<std::vector<float>>& snap);

private:
    std::vector<Param*> list_;
};

// Per-thread gradient buffers; reduced into Param::g in fixed order so
// multi-threaded batches stay deterministic.
class GradSink {
public:
    explicit GradSink(const ParamRegistry& reg);
    std::vector<double>& of(int id) { return g_[size_t(id)]; }
    void clear();
    void accumulate_into(ParamRegistry& reg) const;

private:
    std::vector<std::vector<double>> g_;
};

struct DenseLayer {
    Param w, b;  // w is [out][in] row-major
    int in = 0, out = 0;

    DenseLayer() = default;
    DenseLayer(const std::string& name, int in_dim, int out_dim, Rng& rng, double init_scale = 1.0);
    void register_into(ParamRegistry& reg);
};

struct Conv3dLayer {
    Param w, b;  // w is [co][ci][kx][ky][kz]
    int ci = 0, co = 0, k = 3, stride = 1, pad = 1;

    Conv3dLayer() = default;
    Conv3dLayer(const std::string& name, int ci_, int co_, int k_, int stride_, int pad_, Rng& rng);
    void register_into(ParamRegistry& reg);
    static int out_dim(int in_dim, int k, int stride, int pad) { return (in_dim + 2 * pad - k) / stride + 1; }
};

// Record-and-replay graph: forward calls append nodes, seeds mark loss
// gradients, one reverse sweep fills parameter grads. Nodes own their
// activations, so several forwards (even through shared layers) coexist on
// one tape.
class Tape {
public:
    int input(std::vector<double> v);
    int input3d(std::vector<double> v, int channels, int dim);
    int dense(const DenseLayer& l, int x);
    int conv3d(const Conv3dLayer& l, int x);
    int relu(int x);
    int tanh_act(int x);
    int concat(const std::vector<int>& xs);
    int add(int a, int b);
    int scale(int x, double s);
    int softmax_xent(int logits, int target);
    // Sum of squared vertical residuals of pts against the quadric encoded by
    // a 6-vector node.
    int surface_loss(int delta, std::vector<Vec3d> pts);

    const std::vector<double>& val(int id) const { return nodes_[size_t(id)].v; }
    std::array<double, 256> softmax256(int logits) const;

    void seed(int id, double g);
    void seed_vec(int id, const std::vector<double>& g);
    void backward(GradSink& sink);
    void reset();
    size_t size() const { return nodes_.size(); }

private:
    enum class Op : uint8_t { Input, Dense, Conv3d, Relu, Tanh, Concat, Add, Scale, SoftmaxXent, SurfaceLoss };

    struct Node {
        Op op;
        int a = -1, b = -1;
        std::vector<int> ins;
        const DenseLayer* dn = nullptr;
        const Conv3dLayer* cv = nullptr;
        int ch = 0, dim = 0;
        int target = -1;
        double k = 1.0;
        std::vector<double> v;
        std::vector<double> aux;
        std::vector<Vec3d> pts;
        std::vector<double> g;
    };

    std::vector<double>& grad_of(int id);
    std::vector<Node> nodes_;
};

struct Adam {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void step(ParamRegistry& reg);
    void reset();

private:
    int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

struct GradCheckEntry {
    std::string tensor;
    double max_rel_err = 0.0;
    size_t worst_index = 0;
    double analytic = 0.0, numeric = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;

    bool pass(double tol) const { return max_rel_err < tol; }
    std::string summary() const;
};

// loss(with_grad): returns the scalar loss; when with_grad it must also fill
// Param::g (after zeroing). Elements are subsampled with a fixed stride when
// max_checks_per_tensor > 0.
GradCheckReport grad_check(ParamRegistry& reg, const std::function<double(bool)>& loss, double h = 1e-4,
                           size_t max_checks_per_tensor = 0);

}  // namespace pcz

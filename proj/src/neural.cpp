// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#include "pcz/neural.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "pcz/kernels.hpp"

namespace pcz {

namespace {

size_t shape_size(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) n *= size_t(d);
    return n;
}

void init_uniform(Param& p, Rng& rng, int fan_in, double scale) {
    const double bound = scale / std::sqrt(double(fan_in));
    for (float& w : p.w) w = float(rng.uniform(-bound, bound));
}

}  // namespace

void ParamRegistry::add(Param& p) {
    p.id = int(list_.size());
    list_.push_back(&p);
}

size_t ParamRegistry::total_values() const {
    size_t n = 0;
    for (const Param* p : list_) n += p->size();
    return n;
}

void ParamRegistry::zero_grads() {
    for (Param* p : list_) std::fill(p->g.begin(), p->g.end(), 0.0);
}

std::vector<std::vector<float>> ParamRegistry::snapshot() const {
    std::vector<std::vector<float>> snap;
    snap.reserve(list_.size());
    for (const Param* p : list_) snap.push_back(p->w);
    return snap;
}

void ParamRegistry::restore(const std::vector<std::vector<float>>& snap) {
    if (snap.size() != list_.size()) throw InternalError("snapshot/registry size mismatch");
    for (size_t i = 0; i < snap.size(); ++i) {
        if (snap[i].size() != list_[i]->w.size()) throw InternalError("snapshot tensor size mismatch");
        list_[i]->w = snap[i];
    }
}

GradSink::GradSink(const ParamRegistry& reg) {
    g_.reserve(reg.count());
    for (const Param* p : reg.list()) g_.emplace_back(p->size(), 0.0);
}

void GradSink::clear() {
    for (auto& v : g_) std::fill(v.begin(), v.end(), 0.0);
}

void GradSink::accumulate_into(ParamRegistry& reg) const {
    for (size_t i = 0; i < g_.size(); ++i) {
        Param& p = reg.at(int(i));
        for (size_t j = 0; j < g_[i].size(); ++j) p.g[j] += g_[i][j];
    }
}

DenseLayer::DenseLayer(const std::string& name, int in_dim, int out_dim, Rng& rng, double init_scale)
    : in(in_dim), out(out_dim) {
    w.name = name + ".w";
    w.shape = {out, in};
    w.w.resize(shape_size(w.shape));
    w.g.resize(w.w.size(), 0.0);
    b.name = name + ".b";
    b.shape = {out};
    b.w.resize(size_t(out));
    b.g.resize(b.w.size(), 0.0);
    init_uniform(w, rng, in, init_scale);
    init_uniform(b, rng, in, init_scale);
}

void DenseLayer::register_into(ParamRegistry& reg) {
    reg.add(w);
    reg.add(b);
}

Conv3dLayer::Conv3dLayer(const std::string& name, int ci_, int co_, int k_, int stride_, int pad_, Rng& rng)
    : ci(ci_), co(co_), k(k_), stride(stride_), pad(pad_) {
    w.name = name + ".w";
    w.shape = {co, ci, k, k, k};
    w.w.resize(shape_size(w.shape));
    w.g.resize(w.w.size(), 0.0);
    b.name = name + ".b";
    b.shape = {co};
    b.w.resize(size_t(co));
    b.g.resize(b.w.size(), 0.0);
    const int fan_in = ci * k * k * k;
    init_uniform(w, rng, fan_in, 1.0);
    init_uniform(b, rng, fan_in, 1.0);
}

void Conv3dLayer::register_into(ParamRegistry& reg) {
    reg.add(w);
    reg.add(b);
}

int Tape::input(std::vector<double> v) {
    Node n;
    n.op = Op::Input;
    n.v = std::move(v);
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

int Tape::input3d(std::vector<double> v, int channels, int dim) {
    if (v.size() != size_t(channels) * dim * dim * dim) throw InternalError("input3d size mismatch");
    int id = input(std::move(v));
    nodes_[size_t(id)].ch = channels;
    nodes_[size_t(id)].dim = dim;
    return id;
}

int Tape::dense(const DenseLayer& l, int x) {
    const std::vector<double>& xv = nodes_[size_t(x)].v;
    if (xv.size() != size_t(l.in))
        throw InternalError("dense " + l.w.name + ": input size " + std::to_string(xv.size()) + " != " +
                            std::to_string(l.in));
    Node n;
    n.op = Op::Dense;
    n.a = x;
    n.dn = &l;
    n.v.resize(size_t(l.out));
    const auto& ops = kernels::active();
    for (int o = 0; o < l.out; ++o)
        n.v[size_t(o)] = ops.dot_wf32_xf64(l.w.w.data() + size_t(o) * l.in, xv.data(), size_t(l.in)) + double(l.b.w[size_t(o)]);
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

int Tape::conv3d(const Conv3dLayer& l, int x) {
    const Node& xn = nodes_[size_t(x)];
    if (xn.ch != l.ci || xn.dim <= 0) throw InternalError("conv3d " + l.w.name + ": bad input volume");
    const int di = xn.dim;
    const int d_out = Conv3dLayer::out_dim(di, l.k, l.stride, l.pad);
    if (d_out < 1) throw InternalError("conv3d " + l.w.name + ": kernel does not fit");
    const int P = d_out * d_out * d_out;
    const int Q = l.ci * l.k * l.k * l.k;

    Node n;
    n.op = Op::Conv3d;
    n.a = x;
    n.cv = &l;
    n.ch = l.co;
    n.dim = d_out;
    n.aux.assign(size_t(P) * Q, 0.0);  // im2col, saved for backward
    const std::vector<double>& xv = xn.v;
    size_t p = 0;
    for (int ox = 0; ox < d_out; ++ox)
        for (int oy = 0; oy < d_out; ++oy)
            for (int oz = 0; oz < d_out; ++oz, ++p) {
                double* col = n.aux.data() + p * size_t(Q);
                size_t q = 0;
                for (int c = 0; c < l.ci; ++c)
                    for (int kx = 0; kx < l.k; ++kx) {
                        const int sx = ox * l.stride - l.pad + kx;
                        for (int ky = 0; ky < l.k; ++ky) {
                            const int sy = oy * l.stride - l.pad + ky;
                            for (int kz = 0; kz < l.k; ++kz, ++q) {
                                const int sz = oz * l.stride - l.pad + kz;
                                if (sx < 0 || sy < 0 || sz < 0 || sx >= di || sy >= di || sz >= di) continue;
                                col[q] = xv[((size_t(c) * di + sx) * di + sy) * di + sz];
                            }
                        }
                    }
            }
    n.v.resize(size_t(l.co) * P);
    const auto& ops = kernels::active();
    for (int co = 0; co < l.co; ++co) {
        const float* wrow = l.w.w.data() + size_t(co) * Q;
        const double bias = double(l.b.w[size_t(co)]);
        for (int pp = 0; pp < P; ++pp)
            n.v[size_t(co) * P + pp] = ops.dot_wf32_xf64(wrow, n.aux.data() + size_t(pp) * Q, size_t(Q)) + bias;
    }
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

int Tape::relu(int x) {
    Node n;
    n.op = Op::Relu;
    n.a = x;
    const Node& xn = nodes_[size_t(x)];
    n.ch = xn.ch;
    n.dim = xn.dim;
    n.v.resize(xn.v.size());
    for (size_t i = 0; i < n.v.size(); ++i) n.v[i] = xn.v[i] > 0.0 ? xn.v[i] : 0.0;
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

int Tape::tanh_act(int x) {
    Node n;
    n.op = Op::Tanh;
    n.a = x;
    const Node& xn = nodes_[size_t(x)];
    n.v.resize(xn.v.size());
    for (size_t i = 0; i < n.v.size(); ++i) n.v[i] = std::tanh(xn.v[i]);
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

int Tape::concat(const std::vector<int>& xs) {
    Node n;
    n.op = Op::Concat;
    n.ins = xs;
    size_t total = 0;
    for (int x : xs) total += nodes_[size_t(x)].v.size();
    n.v.reserve(total);
    for (int x : xs) {
        const auto& v = nodes_[size_t(x)].v;
        n.v.insert(n.v.end(), v.begin(), v.end());
    }
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

int Tape::add(int a, int b) {
    const Node& an = nodes_[size_t(a)];
    const Node& bn = nodes_[size_t(b)];
    if (an.v.size() != bn.v.size()) throw InternalError("add: size mismatch");
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.v.resize(an.v.size());
    for (size_t i = 0; i < n.v.size(); ++i) n.v[i] = an.v[i] + bn.v[i];
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

int Tape::scale(int x, double s) {
    Node n;
    n.op = Op::Scale;
    n.a = x;
    n.k = s;
    const Node& xn = nodes_[size_t(x)];
    n.v.resize(xn.v.size());
    for (size_t i = 0; i < n.v.size(); ++i) n.v[i] = s * xn.v[i];
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

std::array<double, 256> Tape::softmax256(int logits) const {
    const std::vector<double>& l = nodes_[size_t(logits)].v;
    if (l.size() != 256) throw InternalError("softmax256 expects 256 logits");
    std::array<double, 256> p;
    double mx = l[0];
    for (double v : l) mx = std::max(mx, v);
    double sum = 0.0;
    for (size_t i = 0; i < 256; ++i) {
        p[i] = std::exp(l[i] - mx);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

int Tape::softmax_xent(int logits, int target) {
    if (target < 0 || target > 255) throw InternalError("softmax_xent: target out of range");
    std::array<double, 256> p = softmax256(logits);
    Node n;
    n.op = Op::SoftmaxXent;
    n.a = logits;
    n.target = target;
    n.aux.assign(p.begin(), p.end());
    n.v = {-std::log(std::max(p[size_t(target)], 1e-300))};
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

int Tape::surface_loss(int delta, std::vector<Vec3d> pts) {
    const std::vector<double>& d = nodes_[size_t(delta)].v;
    if (d.size() != 6) throw InternalError("surface_loss expects 6 coefficients");
    Node n;
    n.op = Op::SurfaceLoss;
    n.a = delta;
    n.pts = std::move(pts);
    n.aux.resize(n.pts.size());
    double loss = 0.0;
    for (size_t i = 0; i < n.pts.size(); ++i) {
        const Vec3d& p = n.pts[i];
        const double fit = d[0] * p.x * p.x + d[1] * p.y * p.y + d[2] * p.x * p.y + d[3] * p.x + d[4] * p.y + d[5];
        const double r = p.z - fit;
        n.aux[i] = r;
        loss += r * r;
    }
    n.v = {loss};
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

std::vector<double>& Tape::grad_of(int id) {
    Node& n = nodes_[size_t(id)];
    if (n.g.empty()) n.g.assign(n.v.size(), 0.0);
    return n.g;
}

void Tape::seed(int id, double g) {
    if (nodes_[size_t(id)].v.size() != 1) throw InternalError("seed expects a scalar node");
    grad_of(id)[0] += g;
}

void Tape::seed_vec(int id, const std::vector<double>& g) {
    std::vector<double>& dst = grad_of(id);
    if (dst.size() != g.size()) throw InternalError("seed_vec size mismatch");
    for (size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

void Tape::backward(GradSink& sink) {
    const auto& ops = kernels::active();
    for (int id = int(nodes_.size()) - 1; id >= 0; --id) {
        Node& n = nodes_[size_t(id)];
        if (n.g.empty()) continue;
        switch (n.op) {
            case Op::Input: break;
            case Op::Dense: {
                const DenseLayer& l = *n.dn;
                Node& xn = nodes_[size_t(n.a)];
                std::vector<double>& dW = sink.of(l.w.id);
                std::vector<double>& dB = sink.of(l.b.id);
                const bool want_dx = xn.op != Op::Input;
                std::vector<double>* dx = want_dx ? &grad_of(n.a) : nullptr;
                for (int o = 0; o < l.out; ++o) {
                    const double go = n.g[size_t(o)];
                    if (go == 0.0) continue;
                    dB[size_t(o)] += go;
                    ops.axpy_f64(go, xn.v.data(), dW.data() + size_t(o) * l.in, size_t(l.in));
                    if (dx) ops.axpy_wf32(go, l.w.w.data() + size_t(o) * l.in, dx->data(), size_t(l.in));
                }
                break;
            }
            case Op::Conv3d: {
                const Conv3dLayer& l = *n.cv;
                Node& xn = nodes_[size_t(n.a)];
                const int di = xn.dim;
                const int d_out = n.dim;
                const int P = d_out * d_out * d_out;
                const int Q = l.ci * l.k * l.k * l.k;
                std::vector<double>& dW = sink.of(l.w.id);
                std::vector<double>& dB = sink.of(l.b.id);
                for (int co = 0; co < l.co; ++co) {
                    double bsum = 0.0;
                    for (int p = 0; p < P; ++p) {
                        const double go = n.g[size_t(co) * P + p];
                        bsum += go;
                        if (go != 0.0) ops.axpy_f64(go, n.aux.data() + size_t(p) * Q, dW.data() + size_t(co) * Q, size_t(Q));
                    }
                    dB[size_t(co)] += bsum;
                }
                if (xn.op != Op::Input) {
                    std::vector<double> dcol(size_t(P) * Q, 0.0);
                    for (int p = 0; p < P; ++p)
                        for (int co = 0; co < l.co; ++co) {
                            const double go = n.g[size_t(co) * P + p];
                            if (go != 0.0) ops.axpy_wf32(go, l.w.w.data() + size_t(co) * Q, dcol.data() + size_t(p) * Q, size_t(Q));
                        }
                    std::vector<double>& dx = grad_of(n.a);
                    size_t p = 0;
                    for (int ox = 0; ox < d_out; ++ox)
                        for (int oy = 0; oy < d_out; ++oy)
                            for (int oz = 0; oz < d_out; ++oz, ++p) {
                                const double* col = dcol.data() + p * size_t(Q);
                                size_t q = 0;
                                for (int c = 0; c < l.ci; ++c)
                                    for (int kx = 0; kx < l.k; ++kx) {
                                        const int sx = ox * l.stride - l.pad + kx;
                                        for (int ky = 0; ky < l.k; ++ky) {
                                            const int sy = oy * l.stride - l.pad + ky;
                                            for (int kz = 0; kz < l.k; ++kz, ++q) {
                                                const int sz = oz * l.stride - l.pad + kz;
                                                if (sx < 0 || sy < 0 || sz < 0 || sx >= di || sy >= di || sz >= di) continue;
                                                dx[((size_t(c) * di + sx) * di + sy) * di + sz] += col[q];
                                            }
                                        }
                                    }
                            }
                }
                break;
            }
            case Op::Relu: {
                const Node& xn = nodes_[size_t(n.a)];
                std::vector<double>& dx = grad_of(n.a);
                for (size_t i = 0; i < n.g.size(); ++i)
                    if (xn.v[i] > 0.0) dx[i] += n.g[i];
                break;
            }
            case Op::Tanh: {
                std::vector<double>& dx = grad_of(n.a);
                for (size_t i = 0; i < n.g.size(); ++i) dx[i] += n.g[i] * (1.0 - n.v[i] * n.v[i]);
                break;
            }
            case Op::Concat: {
                size_t off = 0;
                for (int x : n.ins) {
                    std::vector<double>& dx = grad_of(x);
                    for (size_t i = 0; i < dx.size(); ++i) dx[i] += n.g[off + i];
                    off += dx.size();
                }
                break;
            }
            case Op::Add: {
                std::vector<double>& da = grad_of(n.a);
                for (size_t i = 0; i < n.g.size(); ++i) da[i] += n.g[i];
                std::vector<double>& db = grad_of(n.b);
                for (size_t i = 0; i < n.g.size(); ++i) db[i] += n.g[i];
                break;
            }
            case Op::Scale: {
                std::vector<double>& dx = grad_of(n.a);
                for (size_t i = 0; i < n.g.size(); ++i) dx[i] += n.k * n.g[i];
                break;
            }
            case Op::SoftmaxXent: {
                const double g0 = n.g[0];
                std::vector<double>& dx = grad_of(n.a);
                for (size_t i = 0; i < 256; ++i) {
                    double grad = n.aux[i];
                    if (int(i) == n.target) grad -= 1.0;
                    dx[i] += g0 * grad;
                }
                break;
            }
            case Op::SurfaceLoss: {
                const double g0 = n.g[0];
                const std::vector<double>& d = nodes_[size_t(n.a)].v;
                (void)d;
                std::vector<double>& dd = grad_of(n.a);
                for (size_t i = 0; i < n.pts.size(); ++i) {
                    const Vec3d& p = n.pts[i];
                    const double c = -2.0 * g0 * n.aux[i];
                    dd[0] += c * p.x * p.x;
                    dd[1] += c * p.y * p.y;
                    dd[2] += c * p.x * p.y;
                    dd[3] += c * p.x;
                    dd[4] += c * p.y;
                    dd[5] += c;
                }
                break;
            }
        }
    }
}

void Tape::reset() { nodes_.clear(); }

void Adam::step(ParamRegistry& reg) {
    if (m_.empty()) {
        m_.reserve(reg.count());
        v_.reserve(reg.count());
        for (const Param* p : reg.list()) {
            m_.emplace_back(p->size(), 0.0);
            v_.emplace_back(p->size(), 0.0);
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, double(t_));
    const double bc2 = 1.0 - std::pow(beta2, double(t_));
    for (size_t pi = 0; pi < reg.count(); ++pi) {
        Param& p = reg.at(int(pi));
        std::vector<double>& m = m_[pi];
        std::vector<double>& v = v_[pi];
        for (size_t i = 0; i < p.size(); ++i) {
            const double g = p.g[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            const double mh = m[i] / bc1;
            const double vh = v[i] / bc2;
            p.w[i] = float(double(p.w[i]) - lr * mh / (std::sqrt(vh) + eps));
        }
    }
}

void Adam::reset() {
    t_ = 0;
    m_.clear();
    v_.clear();
}

std::string GradCheckReport::summary() const {
    std::ostringstream os;
    os << "grad check: max relative error " << max_rel_err << "\n";
    for (const GradCheckEntry& e : entries)
        os << "  " << e.tensor << ": " << e.max_rel_err << " (analytic " << e.analytic << ", numeric " << e.numeric
           << " at [" << e.worst_index << "])\n";
    return os.str();
}

GradCheckReport grad_check(ParamRegistry& reg, const std::function<double(bool)>& loss, double h,
                           size_t max_checks_per_tensor) {
    reg.zero_grads();
    const double base = loss(true);
    if (!std::isfinite(base)) throw ValidationError("grad_check: loss is not finite at the evaluation point");

    std::vector<std::vector<double>> analytic;
    analytic.reserve(reg.count());
    for (const Param* p : reg.list()) analytic.push_back(p->g);

    GradCheckReport report;
    for (size_t pi = 0; pi < reg.count(); ++pi) {
        Param& p = reg.at(int(pi));
        GradCheckEntry entry;
        entry.tensor = p.name;
        const size_t n = p.size();
        size_t stride = 1;
        if (max_checks_per_tensor > 0 && n > max_checks_per_tensor) stride = (n + max_checks_per_tensor - 1) / max_checks_per_tensor;
        for (size_t i = 0; i < n; i += stride) {
            const float orig = p.w[i];
            const double ana = analytic[pi][i];
            double rel = 0.0, num = 0.0;
            // refine the step when a probe lands badly: ReLU kinks inside the
            // central-difference window shrink linearly with h
            for (const double hh : {h, h / 8.0, h / 64.0}) {
                const float wp = float(double(orig) + hh);
                const float wm = float(double(orig) - hh);
                p.w[i] = wp;
                const double lp = loss(false);
                p.w[i] = wm;
                const double lm = loss(false);
                p.w[i] = orig;
                num = (lp - lm) / (double(wp) - double(wm));
                rel = std::fabs(ana - num) / std::max({std::fabs(ana), std::fabs(num), 1e-6});
                if (rel < 1e-4) break;
            }
            if (rel > entry.max_rel_err) {
                entry.max_rel_err = rel;
                entry.worst_index = i;
                entry.analytic = ana;
                entry.numeric = num;
            }
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace pcz

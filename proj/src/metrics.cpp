// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#include "pcz/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "pcz/kernels.hpp"

namespace pcz {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int grid_dims_for(size_t n) {
    int d = int(std::ceil(std::cbrt(double(n))));
    return std::clamp(d, 1, 192);
}

// Smallest eigenvector of a symmetric 3x3 matrix, by Jacobi sweeps.
bool min_eigenvector(const double a[3][3], Vec3d& out) {
    double m[3][3];
    double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m[i][j] = a[i][j];
    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = std::fabs(m[0][1]) + std::fabs(m[0][2]) + std::fabs(m[1][2]);
        if (off < 1e-15) break;
        for (int p = 0; p < 2; ++p)
            for (int q = p + 1; q < 3; ++q) {
                if (std::fabs(m[p][q]) < 1e-300) continue;
                const double theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < 3; ++k) {
                    const double mkp = m[k][p], mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double mpk = m[p][k], mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for (int k = 0; k < 3; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
    }
    int best = 0;
    for (int i = 1; i < 3; ++i)
        if (m[i][i] < m[best][best]) best = i;
    const double norm = std::sqrt(v[0][best] * v[0][best] + v[1][best] * v[1][best] + v[2][best] * v[2][best]);
    if (!(norm > 0.0) || !std::isfinite(norm)) return false;
    out = Vec3d{v[0][best] / norm, v[1][best] / norm, v[2][best] / norm};
    return true;
}

double psnr_from_mse(double mse, double peak) { return 10.0 * std::log10(3.0 * peak * peak / mse); }

}  // namespace

NnGrid::NnGrid(const PointCloud& cloud) : n_(cloud.size()) {
    if (cloud.empty()) throw ValidationError("NnGrid: empty cloud");
    Vec3d hi{-kInf, -kInf, -kInf};
    lo_ = Vec3d{kInf, kInf, kInf};
    for (const Vec3f& p : cloud.pts) {
        lo_.x = std::min(lo_.x, double(p.x));
        lo_.y = std::min(lo_.y, double(p.y));
        lo_.z = std::min(lo_.z, double(p.z));
        hi.x = std::max(hi.x, double(p.x));
        hi.y = std::max(hi.y, double(p.y));
        hi.z = std::max(hi.z, double(p.z));
    }
    dims_ = grid_dims_for(n_);
    const double extent = std::max({hi.x - lo_.x, hi.y - lo_.y, hi.z - lo_.z});
    cell_ = extent > 0.0 ? extent / double(dims_) : 1.0;

    std::vector<uint32_t> cell_idx(n_);
    std::vector<uint32_t> counts(size_t(dims_) * dims_ * dims_ + 1, 0);
    auto clamp_cell = [&](double c) { return std::clamp(int(c), 0, dims_ - 1); };
    for (size_t i = 0; i < n_; ++i) {
        const Vec3f& p = cloud.pts[i];
        const int cx = clamp_cell((double(p.x) - lo_.x) / cell_);
        const int cy = clamp_cell((double(p.y) - lo_.y) / cell_);
        const int cz = clamp_cell((double(p.z) - lo_.z) / cell_);
        cell_idx[i] = uint32_t(cell_of(cx, cy, cz));
        counts[cell_idx[i] + 1] += 1;
    }
    for (size_t c = 1; c < counts.size(); ++c) counts[c] += counts[c - 1];
    cell_start_ = counts;
    order_.resize(n_);
    px_.resize(n_);
    py_.resize(n_);
    pz_.resize(n_);
    std::vector<uint32_t> cursor(cell_start_.begin(), cell_start_.end() - 1);
    for (size_t i = 0; i < n_; ++i) {
        const uint32_t at = cursor[cell_idx[i]]++;
        order_[at] = uint32_t(i);
        px_[at] = cloud.pts[i].x;
        py_[at] = cloud.pts[i].y;
        pz_[at] = cloud.pts[i].z;
    }
}

size_t NnGrid::cell_of(int cx, int cy, int cz) const {
    return (size_t(cx) * dims_ + cy) * size_t(dims_) + cz;
}

NnGrid::Hit NnGrid::nearest(const Vec3f& q) const {
    const auto& ops = kernels::active();
    const int qcx = std::clamp(int((double(q.x) - lo_.x) / cell_), 0, dims_ - 1);
    const int qcy = std::clamp(int((double(q.y) - lo_.y) / cell_), 0, dims_ - 1);
    const int qcz = std::clamp(int((double(q.z) - lo_.z) / cell_), 0, dims_ - 1);

    Hit best;
    best.d2 = kInf;
    auto scan_cell = [&](int cx, int cy, int cz) {
        const size_t c = cell_of(cx, cy, cz);
        const uint32_t s = cell_start_[c], e = cell_start_[c + 1];
        if (s == e) return;
        double d2;
        size_t local;
        ops.nn_best_f32(q.x, q.y, q.z, px_.data() + s, py_.data() + s, pz_.data() + s, e - s, &d2, &local);
        const size_t orig = order_[s + local];
        if (d2 < best.d2 || (d2 == best.d2 && orig < best.index)) {
            best.d2 = d2;
            best.index = orig;
        }
    };

    for (int ring = 0;; ++ring) {
        const int xlo = std::max(qcx - ring, 0), xhi = std::min(qcx + ring, dims_ - 1);
        const int ylo = std::max(qcy - ring, 0), yhi = std::min(qcy + ring, dims_ - 1);
        const int zlo = std::max(qcz - ring, 0), zhi = std::min(qcz + ring, dims_ - 1);
        for (int cx = xlo; cx <= xhi; ++cx)
            for (int cy = ylo; cy <= yhi; ++cy)
                for (int cz = zlo; cz <= zhi; ++cz) {
                    const bool shell = cx == qcx - ring || cx == qcx + ring || cy == qcy - ring || cy == qcy + ring ||
                                       cz == qcz - ring || cz == qcz + ring;
                    if (shell || ring == 0) scan_cell(cx, cy, cz);
                }
        // everything outside the scanned box is at least d_out away
        const double bx0 = lo_.x + double(qcx - ring) * cell_, bx1 = lo_.x + double(qcx + ring + 1) * cell_;
        const double by0 = lo_.y + double(qcy - ring) * cell_, by1 = lo_.y + double(qcy + ring + 1) * cell_;
        const double bz0 = lo_.z + double(qcz - ring) * cell_, bz1 = lo_.z + double(qcz + ring + 1) * cell_;
        const double d_out = std::min({double(q.x) - bx0, bx1 - double(q.x), double(q.y) - by0, by1 - double(q.y),
                                       double(q.z) - bz0, bz1 - double(q.z)});
        const bool box_covers_grid = qcx - ring <= 0 && qcy - ring <= 0 && qcz - ring <= 0 && qcx + ring >= dims_ - 1 &&
                                     qcy + ring >= dims_ - 1 && qcz + ring >= dims_ - 1;
        if (box_covers_grid) break;
        if (best.index != SIZE_MAX && d_out > 0.0 && d_out * d_out >= best.d2) break;
    }
    return best;
}

std::vector<NnGrid::Hit> NnGrid::knearest(const Vec3f& q, int k) const {
    const int want = int(std::min<size_t>(size_t(k), n_));
    std::vector<Hit> best;
    best.reserve(size_t(want) + 1);
    auto worst_d2 = [&]() { return int(best.size()) < want ? kInf : best.back().d2; };
    auto offer = [&](double d2, size_t orig) {
        if (int(best.size()) == want) {
            const Hit& w = best.back();
            if (d2 > w.d2 || (d2 == w.d2 && orig > w.index)) return;
        }
        Hit h{d2, orig};
        auto pos = std::upper_bound(best.begin(), best.end(), h, [](const Hit& a, const Hit& b) {
            return a.d2 < b.d2 || (a.d2 == b.d2 && a.index < b.index);
        });
        best.insert(pos, h);
        if (int(best.size()) > want) best.pop_back();
    };

    const int qcx = std::clamp(int((double(q.x) - lo_.x) / cell_), 0, dims_ - 1);
    const int qcy = std::clamp(int((double(q.y) - lo_.y) / cell_), 0, dims_ - 1);
    const int qcz = std::clamp(int((double(q.z) - lo_.z) / cell_), 0, dims_ - 1);
    for (int ring = 0;; ++ring) {
        const int xlo = std::max(qcx - ring, 0), xhi = std::min(qcx + ring, dims_ - 1);
        const int ylo = std::max(qcy - ring, 0), yhi = std::min(qcy + ring, dims_ - 1);
        const int zlo = std::max(qcz - ring, 0), zhi = std::min(qcz + ring, dims_ - 1);
        for (int cx = xlo; cx <= xhi; ++cx)
            for (int cy = ylo; cy <= yhi; ++cy)
                for (int cz = zlo; cz <= zhi; ++cz) {
                    const bool shell = cx == qcx - ring || cx == qcx + ring || cy == qcy - ring || cy == qcy + ring ||
                                       cz == qcz - ring || cz == qcz + ring;
                    if (!shell && ring != 0) continue;
                    const size_t c = cell_of(cx, cy, cz);
                    for (uint32_t at = cell_start_[c]; at < cell_start_[c + 1]; ++at) {
                        const double dx = double(q.x) - double(px_[at]);
                        const double dy = double(q.y) - double(py_[at]);
                        const double dz = double(q.z) - double(pz_[at]);
                        offer((dx * dx + dy * dy) + dz * dz, order_[at]);
                    }
                }
        const double bx0 = lo_.x + double(qcx - ring) * cell_, bx1 = lo_.x + double(qcx + ring + 1) * cell_;
        const double by0 = lo_.y + double(qcy - ring) * cell_, by1 = lo_.y + double(qcy + ring + 1) * cell_;
        const double bz0 = lo_.z + double(qcz - ring) * cell_, bz1 = lo_.z + double(qcz + ring + 1) * cell_;
        const double d_out = std::min({double(q.x) - bx0, bx1 - double(q.x), double(q.y) - by0, by1 - double(q.y),
                                       double(q.z) - bz0, bz1 - double(q.z)});
        const bool box_covers_grid = qcx - ring <= 0 && qcy - ring <= 0 && qcz - ring <= 0 && qcx + ring >= dims_ - 1 &&
                                     qcy + ring >= dims_ - 1 && qcz + ring >= dims_ - 1;
        if (box_covers_grid) break;
        if (int(best.size()) == want && d_out > 0.0 && d_out * d_out >= worst_d2()) break;
    }
    return best;
}

double chamfer_directed(const PointCloud& a, const PointCloud& b) {
    if (a.empty() || b.empty()) throw ValidationError("chamfer: empty cloud");
    NnGrid grid(b);
    double sum = 0.0;
    for (const Vec3f& p : a.pts) sum += std::sqrt(grid.nearest(p).d2);
    return sum / double(a.size());
}

double cd_max(const PointCloud& a, const PointCloud& b) {
    return std::max(chamfer_directed(a, b), chamfer_directed(b, a));
}

PsnrResult psnr_point(const PointCloud& ref, const PointCloud& test, double peak) {
    if (ref.empty() || test.empty()) throw ValidationError("psnr: empty cloud");
    NnGrid gref(ref), gtest(test);
    double mse_rt = 0.0, mse_tr = 0.0;
    for (const Vec3f& p : ref.pts) mse_rt += gtest.nearest(p).d2;
    mse_rt /= double(ref.size());
    for (const Vec3f& p : test.pts) mse_tr += gref.nearest(p).d2;
    mse_tr /= double(test.size());
    const double mse = std::max(mse_rt, mse_tr);
    PsnrResult r;
    if (mse == 0.0) {
        r.infinite = true;
        r.db = kInf;
    } else {
        r.db = psnr_from_mse(mse, peak);
    }
    return r;
}

NormalField estimate_normals(const PointCloud& cloud, int k) {
    NnGrid grid(cloud);
    NormalField nf;
    nf.normals.resize(cloud.size());
    nf.valid.assign(cloud.size(), 0);
    for (size_t i = 0; i < cloud.size(); ++i) {
        const std::vector<NnGrid::Hit> nn = grid.knearest(cloud.pts[i], k);
        if (nn.size() < 3) continue;
        Vec3d c{0, 0, 0};
        for (const auto& h : nn) {
            const Vec3f& p = cloud.pts[h.index];
            c.x += p.x;
            c.y += p.y;
            c.z += p.z;
        }
        const double inv = 1.0 / double(nn.size());
        c.x *= inv;
        c.y *= inv;
        c.z *= inv;
        double cov[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
        for (const auto& h : nn) {
            const Vec3f& p = cloud.pts[h.index];
            const double d[3] = {p.x - c.x, p.y - c.y, p.z - c.z};
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) cov[a][b] += d[a] * d[b];
        }
        double trace = cov[0][0] + cov[1][1] + cov[2][2];
        if (!(trace > 0.0)) continue;  // all neighbours coincide
        Vec3d n;
        if (!min_eigenvector(cov, n)) continue;
        nf.normals[i] = Vec3f{float(n.x), float(n.y), float(n.z)};
        nf.valid[i] = 1;
    }
    return nf;
}

namespace {

// Directed point-to-plane MSE from a to b: residual to the nearest b point,
// projected on that point's normal; falls back to the full residual when the
// normal is degenerate.
double plane_mse_directed(const PointCloud& a, const PointCloud& b, const NormalField& nb, const NnGrid& gb,
                          int* fallbacks) {
    double sum = 0.0;
    for (const Vec3f& p : a.pts) {
        const NnGrid::Hit h = gb.nearest(p);
        const Vec3f& q = b.pts[h.index];
        const double rx = double(p.x) - double(q.x);
        const double ry = double(p.y) - double(q.y);
        const double rz = double(p.z) - double(q.z);
        if (nb.valid[h.index]) {
            const Vec3f& n = nb.normals[h.index];
            const double proj = rx * double(n.x) + ry * double(n.y) + rz * double(n.z);
            sum += proj * proj;
        } else {
            sum += (rx * rx + ry * ry) + rz * rz;
            ++*fallbacks;
        }
    }
    return sum / double(a.size());
}

}  // namespace

PsnrResult psnr_plane(const PointCloud& ref, const PointCloud& test, double peak, int k_normals) {
    if (ref.empty() || test.empty()) throw ValidationError("psnr: empty cloud");
    NnGrid gref(ref), gtest(test);
    const NormalField nref = estimate_normals(ref, k_normals);
    const NormalField ntest = estimate_normals(test, k_normals);
    PsnrResult r;
    const double mse_rt = plane_mse_directed(ref, test, ntest, gtest, &r.plane_fallbacks);
    const double mse_tr = plane_mse_directed(test, ref, nref, gref, &r.plane_fallbacks);
    const double mse = std::max(mse_rt, mse_tr);
    if (mse == 0.0) {
        r.infinite = true;
        r.db = kInf;
    } else {
        r.db = psnr_from_mse(mse, peak);
    }
    return r;
}

double f1_score(const PointCloud& ref, const PointCloud& test, double tau) {
    if (ref.empty() && test.empty()) return 1.0;
    if (ref.empty() || test.empty()) return 0.0;
    const double tau2 = tau * tau;
    NnGrid gref(ref), gtest(test);
    uint64_t tp = 0, fp = 0, fn = 0;
    for (const Vec3f& p : test.pts) {
        if (gref.nearest(p).d2 <= tau2)
            ++tp;
        else
            ++fp;
    }
    for (const Vec3f& p : ref.pts)
        if (gtest.nearest(p).d2 > tau2) ++fn;
    return double(tp) / double(tp + fp + fn);
}

JsMatrix js_divergence_by_level(const std::vector<const Octree*>& trees) {
    if (trees.empty()) throw ValidationError("js divergence: no trees");
    int levels = 0;
    for (const Octree* t : trees) levels = std::max(levels, t->depth());
    std::vector<std::array<double, 256>> hist(static_cast<size_t>(levels));
    std::vector<uint64_t> totals(size_t(levels), 0);
    for (auto& h : hist) h.fill(0.0);
    for (const Octree* t : trees)
        for (int l = 0; l < t->depth(); ++l)
            for (uint8_t s : t->level(l).symbols) {
                hist[size_t(l)][s] += 1.0;
                totals[size_t(l)] += 1;
            }
    JsMatrix out;
    out.levels = levels;
    out.m.assign(size_t(levels) * levels, 0.0);
    out.flagged.assign(size_t(levels), 0);
    for (int l = 0; l < levels; ++l) {
        if (totals[size_t(l)] == 0) {
            out.flagged[size_t(l)] = 1;
            continue;
        }
        for (double& v : hist[size_t(l)]) v /= double(totals[size_t(l)]);
    }
    auto js = [&](const std::array<double, 256>& p, const std::array<double, 256>& q) {
        double acc = 0.0;
        for (int i = 0; i < 256; ++i) {
            const double m = 0.5 * (p[size_t(i)] + q[size_t(i)]);
            if (p[size_t(i)] > 0.0) acc += 0.5 * p[size_t(i)] * std::log2(p[size_t(i)] / m);
            if (q[size_t(i)] > 0.0) acc += 0.5 * q[size_t(i)] * std::log2(q[size_t(i)] / m);
        }
        return acc;
    };
    for (int a = 0; a < levels; ++a)
        for (int b = 0; b < levels; ++b) {
            if (out.flagged[size_t(a)] || out.flagged[size_t(b)]) {
                out.m[size_t(a) * levels + b] = std::numeric_limits<double>::quiet_NaN();
            } else if (a == b) {
                out.m[size_t(a) * levels + b] = 0.0;
            } else if (a < b) {
                out.m[size_t(a) * levels + b] = js(hist[size_t(a)], hist[size_t(b)]);
            } else {
                out.m[size_t(a) * levels + b] = out.m[size_t(b) * levels + a];
            }
        }
    return out;
}

namespace {

std::string fmt_psnr(const PsnrResult& p) {
    if (p.infinite) return "inf";
    std::ostringstream os;
    os << p.db;
    return os.str();
}

}  // namespace

std::string MetricsReport::to_kv() const {
    std::ostringstream os;
    if (bpp >= 0.0) os << "bpp=" << bpp << "\n";
    os << "psnr_point_db=" << fmt_psnr(psnr_pt) << "\n";
    os << "psnr_plane_db=" << fmt_psnr(psnr_pl) << "\n";
    os << "psnr_plane_fallbacks=" << psnr_pl.plane_fallbacks << "\n";
    os << "f1=" << f1 << "\n";
    os << "cd_max=" << cd << "\n";
    for (size_t l = 0; l < level_histograms.size(); ++l) {
        uint64_t total = 0;
        for (uint64_t v : level_histograms[l]) total += v;
        os << "level_" << l << "_symbols=" << total << "\n";
    }
    return os.str();
}

std::string MetricsReport::csv_header() { return "name,bpp,psnr_point_db,psnr_plane_db,f1,cd_max"; }

std::string MetricsReport::to_csv_row(const std::string& name) const {
    std::ostringstream os;
    os << name << ',' << (bpp >= 0.0 ? std::to_string(bpp) : "") << ',' << fmt_psnr(psnr_pt) << ',' << fmt_psnr(psnr_pl)
       << ',' << f1 << ',' << cd;
    return os.str();
}

MetricsReport evaluate_clouds(const PointCloud& ref, const PointCloud& test) {
    MetricsReport r;
    r.psnr_pt = psnr_point(ref, test);
    r.psnr_pl = psnr_plane(ref, test);
    r.f1 = f1_score(ref, test);
    r.cd = cd_max(ref, test);
    return r;
}

}  // namespace pcz

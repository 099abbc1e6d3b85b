// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#include "pcz/entropy_model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "pcz/wire.hpp"

namespace pcz {

namespace fs = std::filesystem;

namespace {

std::vector<double> unpack_block(const BinBlock& b) {
    std::vector<double> v(b.cells());
    for (size_t i = 0; i < v.size(); ++i) v[i] = b.get(i) ? 1.0 : 0.0;
    return v;
}

std::vector<double> embed_input(const OctantInfo& info) {
    std::vector<double> v(19, 0.0);
    v[size_t(std::min(info.level, 15))] = 1.0;
    v[16] = info.cx;
    v[17] = info.cy;
    v[18] = info.cz;
    return v;
}

BinBlock root_block(int k) {
    BinBlock b(k);
    const int r = k / 2;
    b.set(r, r, r);
    return b;
}

OctantInfo root_info() {
    OctantInfo info;
    info.level = 0;
    info.cx = info.cy = info.cz = 0.5;
    info.child_idx = 0;
    return info;
}

// Solve M x = rhs (6x6) by Gaussian elimination with partial pivoting.
// rel_tol flags near-singular pivots relative to the matrix scale; the ridge
// retry passes zero so only exact singularity fails.
bool solve6(std::array<std::array<double, 6>, 6> m, std::array<double, 6> rhs, std::array<double, 6>& out,
            double rel_tol) {
    double scale = 0.0;
    for (const auto& row : m)
        for (double v : row) scale = std::max(scale, std::fabs(v));
    if (scale == 0.0) return false;
    const double tiny = std::max(rel_tol * scale, 1e-300);
    for (int c = 0; c < 6; ++c) {
        int piv = c;
        for (int r = c + 1; r < 6; ++r)
            if (std::fabs(m[size_t(r)][size_t(c)]) > std::fabs(m[size_t(piv)][size_t(c)])) piv = r;
        if (std::fabs(m[size_t(piv)][size_t(c)]) < tiny) return false;
        std::swap(m[size_t(c)], m[size_t(piv)]);
        std::swap(rhs[size_t(c)], rhs[size_t(piv)]);
        for (int r = c + 1; r < 6; ++r) {
            const double f = m[size_t(r)][size_t(c)] / m[size_t(c)][size_t(c)];
            if (f == 0.0) continue;
            for (int cc = c; cc < 6; ++cc) m[size_t(r)][size_t(cc)] -= f * m[size_t(c)][size_t(cc)];
            rhs[size_t(r)] -= f * rhs[size_t(c)];
        }
    }
    for (int r = 5; r >= 0; --r) {
        double acc = rhs[size_t(r)];
        for (int c = r + 1; c < 6; ++c) acc -= m[size_t(r)][size_t(c)] * out[size_t(c)];
        out[size_t(r)] = acc / m[size_t(r)][size_t(r)];
    }
    for (double v : out)
        if (!std::isfinite(v)) return false;
    return true;
}

std::array<double, 6> design_row(const Vec3d& p) {
    return {p.x * p.x, p.y * p.y, p.x * p.y, p.x, p.y, 1.0};
}

void write_ckpt_file(const std::string& path, const std::vector<uint8_t>& bytes) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    in.seekg(0, std::ios::end);
    std::vector<uint8_t> bytes(size_t(in.tellg()));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
    return bytes;
}

constexpr char kCkptMagic[4] = {'P', 'C', 'Z', 'M'};

void serialize_registry(const ParamRegistry& reg, const Digest256& arch, int level, std::vector<uint8_t>& out) {
    wire::put_bytes(out, kCkptMagic, 4);
    wire::put<uint8_t>(out, 1);
    wire::put_bytes(out, arch.data(), arch.size());
    wire::put<int32_t>(out, int32_t(level));
    wire::put<uint32_t>(out, uint32_t(reg.count()));
    for (const Param* p : reg.list()) {
        wire::put_str(out, p->name);
        wire::put<uint8_t>(out, uint8_t(p->shape.size()));
        for (int d : p->shape) wire::put<uint32_t>(out, uint32_t(d));
        wire::put_bytes(out, p->w.data(), p->w.size() * sizeof(float));
    }
}

void deserialize_registry(ParamRegistry& reg, const Digest256& arch, int level, const std::vector<uint8_t>& bytes,
                          const std::string& origin) {
    wire::Reader r(bytes.data(), bytes.size(), origin);
    char magic[4];
    r.get_bytes(magic, 4);
    if (std::memcmp(magic, kCkptMagic, 4) != 0) throw FormatError(origin + ": not a pcz checkpoint");
    const uint8_t version = r.get<uint8_t>();
    if (version != 1) throw FormatError(origin + ": unsupported checkpoint version " + std::to_string(version));
    Digest256 stored;
    r.get_bytes(stored.data(), stored.size());
    if (stored != arch)
        throw ValidationError(origin + ": architecture hash mismatch (checkpoint " + hex_digest(stored).substr(0, 12) +
                              "..., expected " + hex_digest(arch).substr(0, 12) + "...)");
    const int32_t stored_level = r.get<int32_t>();
    if (stored_level != level)
        throw ValidationError(origin + ": checkpoint is for level " + std::to_string(stored_level) + ", expected " +
                              std::to_string(level));
    const uint32_t count = r.get<uint32_t>();
    if (count != reg.count())
        throw FormatError(origin + ": tensor count " + std::to_string(count) + " != " + std::to_string(reg.count()));
    for (Param* p : reg.list()) {
        const std::string name = r.get_str();
        if (name != p->name) throw FormatError(origin + ": tensor '" + name + "' where '" + p->name + "' expected");
        const uint8_t ndim = r.get<uint8_t>();
        if (ndim != p->shape.size()) throw FormatError(origin + ": rank mismatch for " + name);
        for (int d : p->shape) {
            const uint32_t sd = r.get<uint32_t>();
            if (sd != uint32_t(d)) throw FormatError(origin + ": shape mismatch for " + name);
        }
        r.get_bytes(p->w.data(), p->w.size() * sizeof(float));
        std::fill(p->g.begin(), p->g.end(), 0.0);
    }
}

}  // namespace

std::string ModelConfig::arch_string() const {
    std::ostringstream os;
    os << "pcz-arch-v1"
       << "|k=" << k << "|conv=" << conv_ch[0] << ',' << conv_ch[1] << ',' << conv_ch[2] << "|stride=" << conv_stride[0]
       << ',' << conv_stride[1] << ',' << conv_stride[2] << "|hneigh=" << h_neigh << "|sibconv=" << sib_conv_ch << ','
       << sib_conv_stride << "|hsib=" << h_sib << "|dan=" << d_an << "|embed=" << embed << "|geo=" << geo
       << "|head=" << header_hidden << "|lambda=" << std::setprecision(17) << lambda << "|sib=" << use_sibling
       << "|an=" << use_ancestor << "|surf=" << use_surface << "|mask=" << sibling_known_mask;
    return os.str();
}

Digest256 ModelConfig::arch_hash() const { return sha256(arch_string()); }

std::vector<Vec3d> block_surface_points(const BinBlock& v) {
    std::vector<Vec3d> pts;
    const int r = v.dim / 2;
    size_t i = 0;
    for (int x = 0; x < v.dim; ++x)
        for (int y = 0; y < v.dim; ++y)
            for (int z = 0; z < v.dim; ++z, ++i)
                if (v.get(i)) pts.push_back(Vec3d{double(x - r), double(y - r), double(z - r)});
    return pts;
}

QuadricFit solve_quadratic_lsq(const std::vector<Vec3d>& pts) {
    if (pts.empty()) throw ValidationError("solve_quadratic_lsq: no points");
    std::array<std::array<double, 6>, 6> ata{};
    std::array<double, 6> atz{};
    for (const Vec3d& p : pts) {
        const std::array<double, 6> row = design_row(p);
        for (int i = 0; i < 6; ++i) {
            atz[size_t(i)] += row[size_t(i)] * p.z;
            for (int j = 0; j < 6; ++j) ata[size_t(i)][size_t(j)] += row[size_t(i)] * row[size_t(j)];
        }
    }
    QuadricFit fit;
    if (solve6(ata, atz, fit.delta, 1e-10)) return fit;
    for (int i = 0; i < 6; ++i) ata[size_t(i)][size_t(i)] += 1e-8;
    fit.ridged = true;
    if (!solve6(ata, atz, fit.delta, 0.0)) throw InternalError("quadric fit failed even with ridge");
    return fit;
}

double quadric_residual(const std::array<double, 6>& delta, const std::vector<Vec3d>& pts) {
    double loss = 0.0;
    for (const Vec3d& p : pts) {
        const std::array<double, 6> row = design_row(p);
        double fitv = 0.0;
        for (int i = 0; i < 6; ++i) fitv += delta[size_t(i)] * row[size_t(i)];
        const double r = p.z - fitv;
        loss += r * r;
    }
    return loss;
}

LevelModel::LevelModel(const ModelConfig& cfg, int level, uint64_t seed) : cfg_(cfg), level_(level) {
    Rng rng(seed);
    const int n1 = Conv3dLayer::out_dim(cfg.k, 3, cfg.conv_stride[0], 1);
    const int n2 = Conv3dLayer::out_dim(n1, 3, cfg.conv_stride[1], 1);
    const int n3 = Conv3dLayer::out_dim(n2, 3, cfg.conv_stride[2], 1);
    const int ns = Conv3dLayer::out_dim(4, 3, cfg.sib_conv_stride, 1);
    if (n1 < 1 || n2 < 1 || n3 < 1 || ns < 1)
        throw ValidationError("model config: conv stack does not fit k=" + std::to_string(cfg.k));
    const std::string pfx = "l" + std::to_string(level) + ".";
    const int sib_in = cfg.sibling_known_mask ? 2 : 1;

    conv1_ = Conv3dLayer(pfx + "conv1", 1, cfg.conv_ch[0], 3, cfg.conv_stride[0], 1, rng);
    conv2_ = Conv3dLayer(pfx + "conv2", cfg.conv_ch[0], cfg.conv_ch[1], 3, cfg.conv_stride[1], 1, rng);
    conv3_ = Conv3dLayer(pfx + "conv3", cfg.conv_ch[1], cfg.conv_ch[2], 3, cfg.conv_stride[2], 1, rng);
    neigh_fc_ = DenseLayer(pfx + "neigh_fc", cfg.conv_ch[2] * n3 * n3 * n3, cfg.h_neigh, rng);
    sib_conv_ = Conv3dLayer(pfx + "sib_conv", sib_in, cfg.sib_conv_ch, 3, cfg.sib_conv_stride, 1, rng);
    sib_fc_ = DenseLayer(pfx + "sib_fc", cfg.sib_conv_ch * ns * ns * ns, cfg.h_sib, rng);
    embed_fc_ = DenseLayer(pfx + "embed", 19, cfg.embed, rng);
    phi1_ = DenseLayer(pfx + "phi1", cfg.h_neigh + cfg.embed, cfg.d_an, rng);
    phi2_ = DenseLayer(pfx + "phi2", cfg.d_an, cfg.d_an, rng);
    gamma_ = DenseLayer(pfx + "gamma", cfg.d_an, cfg.h_neigh, rng);
    geo_fc_ = DenseLayer(pfx + "geo_fc", cfg.conv_ch[1] * n2 * n2 * n2, cfg.geo, rng);
    delta_fc_ = DenseLayer(pfx + "delta_fc", cfg.geo, 6, rng);
    const int head_in = cfg.h_neigh + cfg.d_an + cfg.h_sib + cfg.geo + cfg.embed;
    head1_ = DenseLayer(pfx + "head1", head_in, cfg.header_hidden, rng);
    head2_ = DenseLayer(pfx + "head2", cfg.header_hidden, cfg.header_hidden, rng);
    head3_ = DenseLayer(pfx + "head3", cfg.header_hidden, cfg.header_hidden, rng);
    head4_ = DenseLayer(pfx + "head4", cfg.header_hidden, 256, rng, 0.1);

    conv1_.register_into(reg_);
    conv2_.register_into(reg_);
    conv3_.register_into(reg_);
    neigh_fc_.register_into(reg_);
    sib_conv_.register_into(reg_);
    sib_fc_.register_into(reg_);
    embed_fc_.register_into(reg_);
    phi1_.register_into(reg_);
    phi2_.register_into(reg_);
    gamma_.register_into(reg_);
    geo_fc_.register_into(reg_);
    delta_fc_.register_into(reg_);
    head1_.register_into(reg_);
    head2_.register_into(reg_);
    head3_.register_into(reg_);
    head4_.register_into(reg_);
}

int LevelModel::trunk_nodes(Tape& t, const BinBlock& v, int& h_feat_out) const {
    if (v.dim != cfg_.k)
        throw ValidationError("neighbor block is " + std::to_string(v.dim) + "^3, model expects " +
                              std::to_string(cfg_.k) + "^3");
    const int x = t.input3d(unpack_block(v), 1, cfg_.k);
    const int c1 = t.relu(t.conv3d(conv1_, x));
    const int c2 = t.relu(t.conv3d(conv2_, c1));
    h_feat_out = c2;
    const int c3 = t.relu(t.conv3d(conv3_, c2));
    return t.relu(t.dense(neigh_fc_, c3));
}

int LevelModel::embed_node(Tape& t, const OctantInfo& info) const {
    return t.relu(t.dense(embed_fc_, t.input(embed_input(info))));
}

LevelModel::FwdNodes LevelModel::forward(Tape& t, const CtxInputs& in, int target_symbol) const {
    FwdNodes out;
    int h_feat = -1;
    out.h_neigh = trunk_nodes(t, *in.v, h_feat);
    const int emb = embed_node(t, in.info);

    const int phi_in = t.concat({out.h_neigh, emb});
    out.h_child = t.dense(phi2_, t.relu(t.dense(phi1_, phi_in)));
    out.h_hat = t.add(t.dense(gamma_, out.h_child), out.h_neigh);

    int han;
    if (!cfg_.use_ancestor) {
        han = t.input(std::vector<double>(size_t(cfg_.d_an), 0.0));
    } else if (in.h_an != nullptr) {
        han = t.input(*in.h_an);
    } else {
        // child of the root: run the root's own pass through this model so the
        // constant it contributes is trained along with everything else
        const BinBlock rb = root_block(cfg_.k);
        int rfeat = -1;
        const int rneigh = trunk_nodes(t, rb, rfeat);
        const int remb = embed_node(t, root_info());
        const int rphi = t.concat({rneigh, remb});
        han = t.dense(phi2_, t.relu(t.dense(phi1_, rphi)));
    }

    int hsib;
    {
        const int sib_in_ch = cfg_.sibling_known_mask ? 2 : 1;
        std::vector<double> sib_data;
        if (cfg_.use_sibling && in.vsib != nullptr) {
            sib_data = unpack_block(*in.vsib);
            if (cfg_.sibling_known_mask) {
                std::vector<double> mask = in.vsib_known != nullptr
                                               ? unpack_block(*in.vsib_known)
                                               : std::vector<double>(64, 0.0);
                sib_data.insert(sib_data.end(), mask.begin(), mask.end());
            }
        } else {
            sib_data.assign(size_t(sib_in_ch) * 64, 0.0);
        }
        const int sin = t.input3d(std::move(sib_data), sib_in_ch, 4);
        const int sc = t.relu(t.conv3d(sib_conv_, sin));
        hsib = t.relu(t.dense(sib_fc_, sc));
    }

    int hgeo;
    if (cfg_.use_surface) {
        hgeo = t.relu(t.dense(geo_fc_, h_feat));
        out.delta = t.dense(delta_fc_, hgeo);
    } else {
        hgeo = t.input(std::vector<double>(size_t(cfg_.geo), 0.0));
    }

    const int hin = t.concat({out.h_hat, han, hsib, hgeo, emb});
    const int h1 = t.relu(t.dense(head1_, hin));
    const int h2 = t.relu(t.dense(head2_, h1));
    const int h3 = t.relu(t.dense(head3_, h2));
    out.logits = t.dense(head4_, h3);

    if (target_symbol >= 0) {
        out.ce = t.softmax_xent(out.logits, target_symbol);
        if (cfg_.use_surface) {
            std::vector<Vec3d> pts = block_surface_points(*in.v);
            if (pts.size() >= 6) out.surface = t.surface_loss(out.delta, std::move(pts));
        }
    }
    return out;
}

PredictOut LevelModel::predict(const CtxInputs& in) const {
    Tape t;
    const FwdNodes f = forward(t, in, -1);
    PredictOut out;
    out.probs = t.softmax256(f.logits);
    out.h_child = t.val(f.h_child);
    return out;
}

std::vector<double> LevelModel::ancestor_for_children(const BinBlock& v, const OctantInfo& info) const {
    Tape t;
    int h_feat = -1;
    const int hn = trunk_nodes(t, v, h_feat);
    const int emb = embed_node(t, info);
    const int hc = t.dense(phi2_, t.relu(t.dense(phi1_, t.concat({hn, emb}))));
    return t.val(hc);
}

LevelModel::NeighborFeatures LevelModel::neighbor_features(const BinBlock& v) const {
    Tape t;
    int h_feat = -1;
    const int hn = trunk_nodes(t, v, h_feat);
    return {t.val(hn), t.val(h_feat)};
}

std::vector<double> LevelModel::sibling_features(const BinBlock& vsib, const BinBlock* known) const {
    Tape t;
    const int sib_in_ch = cfg_.sibling_known_mask ? 2 : 1;
    std::vector<double> data = unpack_block(vsib);
    if (cfg_.sibling_known_mask) {
        std::vector<double> mask = known != nullptr ? unpack_block(*known) : std::vector<double>(64, 0.0);
        data.insert(data.end(), mask.begin(), mask.end());
    }
    const int sin = t.input3d(std::move(data), sib_in_ch, 4);
    const int hs = t.relu(t.dense(sib_fc_, t.relu(t.conv3d(sib_conv_, sin))));
    return t.val(hs);
}

LevelModel::AncestorPass LevelModel::ancestor_pass(const std::vector<double>& h_neigh, const OctantInfo& info) const {
    Tape t;
    const int hn = t.input(h_neigh);
    const int emb = embed_node(t, info);
    const int hc = t.dense(phi2_, t.relu(t.dense(phi1_, t.concat({hn, emb}))));
    const int hhat = t.add(t.dense(gamma_, hc), hn);
    return {t.val(hc), t.val(hhat)};
}

LevelModel::SurfaceHead LevelModel::surface_head(const BinBlock& v) const {
    Tape t;
    int h_feat = -1;
    (void)trunk_nodes(t, v, h_feat);
    const int hgeo = t.relu(t.dense(geo_fc_, h_feat));
    const int d = t.dense(delta_fc_, hgeo);
    SurfaceHead out;
    out.h_geo = t.val(hgeo);
    const std::vector<double>& dv = t.val(d);
    std::copy(dv.begin(), dv.end(), out.delta.begin());
    return out;
}

void LevelModel::serialize(std::vector<uint8_t>& out) const {
    serialize_registry(reg_, cfg_.arch_hash(), level_, out);
}

void LevelModel::deserialize(const std::vector<uint8_t>& bytes, const std::string& origin) {
    deserialize_registry(reg_, cfg_.arch_hash(), level_, bytes, origin);
}

RefineModel::RefineModel(const ModelConfig& cfg, int level, uint64_t seed) : cfg_(cfg), level_(level) {
    Rng rng(seed);
    const int n1 = Conv3dLayer::out_dim(cfg.k, 3, cfg.conv_stride[0], 1);
    const int n2 = Conv3dLayer::out_dim(n1, 3, cfg.conv_stride[1], 1);
    const int n3 = Conv3dLayer::out_dim(n2, 3, cfg.conv_stride[2], 1);
    const std::string pfx = "r" + std::to_string(level) + ".";
    conv1_ = Conv3dLayer(pfx + "conv1", 1, cfg.conv_ch[0], 3, cfg.conv_stride[0], 1, rng);
    conv2_ = Conv3dLayer(pfx + "conv2", cfg.conv_ch[0], cfg.conv_ch[1], 3, cfg.conv_stride[1], 1, rng);
    conv3_ = Conv3dLayer(pfx + "conv3", cfg.conv_ch[1], cfg.conv_ch[2], 3, cfg.conv_stride[2], 1, rng);
    fc_ = DenseLayer(pfx + "fc", cfg.conv_ch[2] * n3 * n3 * n3, cfg.h_neigh, rng);
    embed_fc_ = DenseLayer(pfx + "embed", 19, cfg.embed, rng);
    // zero-ish head so refinement starts as the identity (offsets near 0)
    head_ = DenseLayer(pfx + "head", cfg.h_neigh + cfg.embed, 24, rng, 0.01);
    conv1_.register_into(reg_);
    conv2_.register_into(reg_);
    conv3_.register_into(reg_);
    fc_.register_into(reg_);
    embed_fc_.register_into(reg_);
    head_.register_into(reg_);
}

int RefineModel::forward(Tape& t, const BinBlock& v, const OctantInfo& info) const {
    if (v.dim != cfg_.k) throw ValidationError("refine: neighbor block dim mismatch");
    const int x = t.input3d(unpack_block(v), 1, cfg_.k);
    const int c1 = t.relu(t.conv3d(conv1_, x));
    const int c2 = t.relu(t.conv3d(conv2_, c1));
    const int c3 = t.relu(t.conv3d(conv3_, c2));
    const int hf = t.relu(t.dense(fc_, c3));
    const int emb = t.relu(t.dense(embed_fc_, t.input(embed_input(info))));
    return t.dense(head_, t.concat({hf, emb}));
}

std::array<double, 24> RefineModel::raw_offsets(const BinBlock& v, const OctantInfo& info) const {
    Tape t;
    const int raw = forward(t, v, info);
    std::array<double, 24> out;
    const std::vector<double>& rv = t.val(raw);
    std::copy(rv.begin(), rv.end(), out.begin());
    return out;
}

void RefineModel::serialize(std::vector<uint8_t>& out) const {
    serialize_registry(reg_, cfg_.arch_hash(), 10000 + level_, out);
}

void RefineModel::deserialize(const std::vector<uint8_t>& bytes, const std::string& origin) {
    deserialize_registry(reg_, cfg_.arch_hash(), 10000 + level_, bytes, origin);
}

namespace {

uint64_t level_seed(uint64_t bundle_seed, int level) { return Rng(bundle_seed).fork(uint64_t(level)).next_u64(); }
uint64_t refine_seed(uint64_t bundle_seed, int depth) {
    return Rng(bundle_seed).fork(uint64_t(5000 + depth)).next_u64();
}

std::string level_ckpt_name(int l) {
    std::ostringstream os;
    os << "level_" << std::setw(2) << std::setfill('0') << l << ".ckpt";
    return os.str();
}

std::string refine_ckpt_name(int l) {
    std::ostringstream os;
    os << "refine_" << std::setw(2) << std::setfill('0') << l << ".ckpt";
    return os.str();
}

}  // namespace

ModelBundle ModelBundle::fresh(const BundleConfig& cfg) {
    if (cfg.max_level < 1 || cfg.max_level > kMaxOctreeDepth)
        throw ValidationError("bundle max_level must be in [1," + std::to_string(kMaxOctreeDepth) + "]");
    ModelBundle b;
    b.cfg_ = cfg;
    for (int l = 1; l <= cfg.max_level; ++l)
        b.levels_.push_back(std::make_unique<LevelModel>(cfg.model, l, level_seed(cfg.seed, l)));
    for (int d : cfg.refine_levels) b.refine_[d] = std::make_unique<RefineModel>(cfg.model, d, refine_seed(cfg.seed, d));
    return b;
}

LevelModel& ModelBundle::level(int l) {
    if (l < 1 || l > cfg_.max_level)
        throw ValidationError("no entropy model for level " + std::to_string(l) + "; bundle has " +
                              supported_levels_str());
    return *levels_[size_t(l) - 1];
}

const LevelModel& ModelBundle::level(int l) const { return const_cast<ModelBundle*>(this)->level(l); }

RefineModel* ModelBundle::refine(int depth) {
    auto it = refine_.find(depth);
    return it == refine_.end() ? nullptr : it->second.get();
}

const RefineModel* ModelBundle::refine(int depth) const { return const_cast<ModelBundle*>(this)->refine(depth); }

RefineModel& ModelBundle::add_refine(int depth) {
    auto it = refine_.find(depth);
    if (it == refine_.end()) {
        it = refine_.emplace(depth, std::make_unique<RefineModel>(cfg_.model, depth, refine_seed(cfg_.seed, depth))).first;
        if (std::find(cfg_.refine_levels.begin(), cfg_.refine_levels.end(), depth) == cfg_.refine_levels.end())
            cfg_.refine_levels.push_back(depth);
        std::sort(cfg_.refine_levels.begin(), cfg_.refine_levels.end());
    }
    return *it->second;
}

std::string ModelBundle::supported_levels_str() const {
    return "levels 1.." + std::to_string(cfg_.max_level) + " (code depths up to " + std::to_string(cfg_.max_level + 1) +
           ")";
}

std::vector<double> ModelBundle::root_ancestor() const {
    return level(1).ancestor_for_children(root_block(cfg_.model.k), root_info());
}

std::string ModelBundle::manifest_text() const {
    std::ostringstream os;
    os << "format=pcz-bundle-v1\n";
    os << "max_level=" << cfg_.max_level << "\n";
    os << "refine_levels=";
    for (size_t i = 0; i < cfg_.refine_levels.size(); ++i) os << (i ? "," : "") << cfg_.refine_levels[i];
    os << "\n";
    os << "seed=" << cfg_.seed << "\n";
    const ModelConfig& m = cfg_.model;
    os << "k=" << m.k << "\n";
    os << "conv_ch=" << m.conv_ch[0] << ',' << m.conv_ch[1] << ',' << m.conv_ch[2] << "\n";
    os << "conv_stride=" << m.conv_stride[0] << ',' << m.conv_stride[1] << ',' << m.conv_stride[2] << "\n";
    os << "h_neigh=" << m.h_neigh << "\n";
    os << "sib_conv_ch=" << m.sib_conv_ch << "\n";
    os << "sib_conv_stride=" << m.sib_conv_stride << "\n";
    os << "h_sib=" << m.h_sib << "\n";
    os << "d_an=" << m.d_an << "\n";
    os << "embed=" << m.embed << "\n";
    os << "geo=" << m.geo << "\n";
    os << "header_hidden=" << m.header_hidden << "\n";
    os << "lambda=" << std::setprecision(17) << m.lambda << "\n";
    os << "use_sibling=" << int(m.use_sibling) << "\n";
    os << "use_ancestor=" << int(m.use_ancestor) << "\n";
    os << "use_surface=" << int(m.use_surface) << "\n";
    os << "sibling_known_mask=" << int(m.sibling_known_mask) << "\n";
    os << "arch_hash=" << hex_digest(m.arch_hash()) << "\n";
    return os.str();
}

Digest256 ModelBundle::hash() const {
    Sha256 h;
    const std::string manifest = manifest_text();
    h.update(manifest.data(), manifest.size());
    std::vector<uint8_t> buf;
    for (const auto& lm : levels_) {
        buf.clear();
        lm->serialize(buf);
        h.update(buf.data(), buf.size());
    }
    for (const auto& [depth, rm] : refine_) {
        buf.clear();
        rm->serialize(buf);
        h.update(buf.data(), buf.size());
    }
    return h.finish();
}


void ModelBundle::save(const std::string& dir) const {
    fs::create_directories(dir);
    std::vector<uint8_t> buf;
    for (int l = 1; l <= cfg_.max_level; ++l) {
        buf.clear();
        levels_[size_t(l) - 1]->serialize(buf);
        write_ckpt_file((fs::path(dir) / level_ckpt_name(l)).string(), buf);
    }
    for (const auto& [depth, rm] : refine_) {
        buf.clear();
        rm->serialize(buf);
        write_ckpt_file((fs::path(dir) / refine_ckpt_name(depth)).string(), buf);
    }
    std::string manifest = manifest_text();
    manifest += "bundle_hash=" + hex_digest(hash()) + "\n";
    std::ofstream out(fs::path(dir) / "manifest.txt");
    if (!out) throw IoError("cannot write bundle manifest in " + dir);
    out << manifest;
}

ModelBundle ModelBundle::load(const std::string& dir) {
    const std::string mpath = (fs::path(dir) / "manifest.txt").string();
    std::ifstream in(mpath);
    if (!in) throw IoError("cannot open bundle manifest " + mpath);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError(mpath + ": bad line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto need = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw FormatError(mpath + ": missing key '" + key + "'");
        return it->second;
    };
    auto ints = [](const std::string& s) {
        std::vector<int> out;
        std::istringstream is(s);
        std::string tok;
        while (std::getline(is, tok, ','))
            if (!tok.empty()) out.push_back(std::stoi(tok));
        return out;
    };
    if (need("format") != "pcz-bundle-v1") throw FormatError(mpath + ": unsupported bundle format");

    BundleConfig cfg;
    cfg.max_level = std::stoi(need("max_level"));
    cfg.refine_levels = ints(kv.count("refine_levels") ? kv["refine_levels"] : "");
    cfg.seed = std::stoull(need("seed"));
    ModelConfig& m = cfg.model;
    m.k = std::stoi(need("k"));
    auto cc = ints(need("conv_ch"));
    auto cs = ints(need("conv_stride"));
    if (cc.size() != 3 || cs.size() != 3) throw FormatError(mpath + ": conv_ch/conv_stride need three entries");
    std::copy(cc.begin(), cc.end(), m.conv_ch.begin());
    std::copy(cs.begin(), cs.end(), m.conv_stride.begin());
    m.h_neigh = std::stoi(need("h_neigh"));
    m.sib_conv_ch = std::stoi(need("sib_conv_ch"));
    m.sib_conv_stride = std::stoi(need("sib_conv_stride"));
    m.h_sib = std::stoi(need("h_sib"));
    m.d_an = std::stoi(need("d_an"));
    m.embed = std::stoi(need("embed"));
    m.geo = std::stoi(need("geo"));
    m.header_hidden = std::stoi(need("header_hidden"));
    m.lambda = std::stod(need("lambda"));
    m.use_sibling = need("use_sibling") == "1";
    m.use_ancestor = need("use_ancestor") == "1";
    m.use_surface = need("use_surface") == "1";
    m.sibling_known_mask = need("sibling_known_mask") == "1";
    if (hex_digest(m.arch_hash()) != need("arch_hash"))
        throw ValidationError(mpath + ": stored arch_hash does not match the manifest configuration");

    ModelBundle b = fresh(cfg);
    for (int l = 1; l <= cfg.max_level; ++l) {
        const std::string p = (fs::path(dir) / level_ckpt_name(l)).string();
        b.levels_[size_t(l) - 1]->deserialize(read_file_bytes(p), p);
    }
    for (int d : cfg.refine_levels) {
        const std::string p = (fs::path(dir) / refine_ckpt_name(d)).string();
        b.refine_[d]->deserialize(read_file_bytes(p), p);
    }
    if (kv.count("bundle_hash")) {
        const std::string expect = kv["bundle_hash"];
        const std::string got = hex_digest(b.hash());
        if (expect != got)
            throw ValidationError(mpath + ": bundle hash mismatch (checkpoints modified after save?)");
    }
    return b;
}

}  // namespace pcz

// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#include "pcz/codec.hpp"

#include <bit>
#include <cmath>
#include <sstream>

#include "pcz/wire.hpp"

static_assert(std::endian::native == std::endian::little, "frame format assumes a little-endian host");

namespace pcz {

namespace {

constexpr char kMagic[4] = {'P', 'C', 'Z', '1'};

RateReport make_report(uint64_t payload_bytes, uint64_t n_points, uint64_t symbols, double est_bits) {
    RateReport r;
    r.header_bits = FrameHeader::kSize * 8;
    r.payload_bits = payload_bytes * 8;
    r.n_points = n_points;
    r.symbol_count = symbols;
    r.model_bits_estimate = est_bits;
    r.bpp = double(r.header_bits + r.payload_bits) / double(n_points);
    return r;
}

}  // namespace

void FrameHeader::write(std::vector<uint8_t>& out) const {
    out.reserve(out.size() + kSize);
    wire::put_bytes(out, kMagic, 4);
    wire::put<uint8_t>(out, version);
    wire::put<uint8_t>(out, depth);
    wire::put<uint16_t>(out, flags);
    wire::put<uint64_t>(out, n_points);
    wire::put<double>(out, origin.x);
    wire::put<double>(out, origin.y);
    wire::put<double>(out, origin.z);
    wire::put<double>(out, side);
    wire::put_bytes(out, bundle_hash.data(), bundle_hash.size());
    wire::put<uint64_t>(out, payload_len);
}

FrameHeader FrameHeader::read(const uint8_t* data, size_t len) {
    wire::Reader r(data, len, "frame header");
    char magic[4];
    r.get_bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a pcz frame (bad magic)");
    FrameHeader h;
    h.version = r.get<uint8_t>();
    if (h.version != 1) throw FormatError("unsupported frame version " + std::to_string(h.version));
    h.depth = r.get<uint8_t>();
    h.flags = r.get<uint16_t>();
    h.n_points = r.get<uint64_t>();
    h.origin.x = r.get<double>();
    h.origin.y = r.get<double>();
    h.origin.z = r.get<double>();
    h.side = r.get<double>();
    r.get_bytes(h.bundle_hash.data(), h.bundle_hash.size());
    h.payload_len = r.get<uint64_t>();
    return h;
}

std::string RateReport::to_kv() const {
    std::ostringstream os;
    os << "n_points=" << n_points << "\n"
       << "symbols=" << symbol_count << "\n"
       << "header_bits=" << header_bits << "\n"
       << "payload_bits=" << payload_bits << "\n"
       << "model_bits_estimate=" << model_bits_estimate << "\n"
       << "bpp=" << bpp << "\n";
    return os.str();
}

std::string RateReport::csv_header() { return "name,n_points,symbols,header_bits,payload_bits,model_bits_estimate,bpp"; }

std::string RateReport::to_csv_row(const std::string& name) const {
    std::ostringstream os;
    os << name << ',' << n_points << ',' << symbol_count << ',' << header_bits << ',' << payload_bits << ','
       << model_bits_estimate << ',' << bpp;
    return os.str();
}

namespace {

// Shared walk for model-driven coding. On decode the tree is grown level by
// level, so contexts only ever see already-decoded state; on encode the same
// code runs against the finished tree (the grids are identical by the
// dual-construction invariant, tested in the octree suite).
struct SymbolSink {
    RangeEncoder* enc = nullptr;
    RangeDecoder* dec = nullptr;

    // Returns the coded symbol (encode passes it through).
    int transfer(const QuantizedDistribution& d, int symbol) {
        if (enc) {
            enc->encode(d, symbol);
            return symbol;
        }
        return dec->decode(d);
    }
};

struct WalkResult {
    uint64_t symbols = 0;
    double est_bits = 0.0;
};

// When decoding, `levels` starts with only the root and is grown in place;
// when encoding it is a const view of the full tree.
WalkResult walk_frame(std::vector<OctreeLevel>& levels, int depth, const ModelBundle& bundle, SymbolSink& sink,
                      CodecTrace* trace) {
    const bool decoding = sink.dec != nullptr;
    WalkResult res;
    const ModelConfig& mc = bundle.config().model;

    // root symbol, uniform: no context exists at level zero
    {
        const QuantizedDistribution& u = QuantizedDistribution::uniform();
        int s;
        if (decoding) {
            s = sink.transfer(u, -1);
            if (s == 0) throw FormatError("decoded an empty occupancy symbol for the root");
            levels[0].symbols = {uint8_t(s)};
        } else {
            s = levels[0].symbols[0];
            sink.transfer(u, s);
        }
        if (trace) trace->dists.push_back(u);
        res.symbols += 1;
        res.est_bits += u.bits_for(s);
    }

    std::vector<std::vector<double>> han_prev;
    if (depth >= 2) han_prev.push_back(bundle.root_ancestor());

    for (int l = 1; l < depth; ++l) {
        OctreeLevel& parent = levels[size_t(l) - 1];
        if (decoding) {
            OctreeLevel next;
            for (size_t pi = 0; pi < parent.count(); ++pi)
                for (int k = 0; k < 8; ++k)
                    if (parent.symbols[pi] & (1u << k)) next.codes.push_back(parent.codes[pi] << 3 | uint64_t(k));
            levels[size_t(l)] = std::move(next);
        }
        OctreeLevel& cur = levels[size_t(l)];
        if (decoding) cur.symbols.reserve(cur.count());

        LevelGrid grid = LevelGrid::from_parent_symbols(parent, l - 1);
        const LevelModel& model = bundle.level(l);
        const bool keep_han = l + 1 < depth;
        std::vector<std::vector<double>> han_cur;
        if (keep_han) han_cur.resize(cur.count());

        size_t ci = 0;
        for (size_t pi = 0; pi < parent.count(); ++pi) {
            SiblingAccum sib;
            if (mc.sibling_known_mask) sib.set_parent_symbol(parent.symbols[pi]);
            for (int k = 0; k < 8; ++k) {
                if (!(parent.symbols[pi] & (1u << k))) continue;
                const uint64_t code = parent.codes[pi] << 3 | uint64_t(k);
                const BinBlock v = neighbor_block(grid, code, mc.k);
                CtxInputs in;
                in.v = &v;
                in.vsib = &sib.occupancy();
                in.vsib_known = &sib.known();
                in.info = octant_info(l, code);
                in.h_an = &han_prev[pi];
                PredictOut model_out = model.predict(in);
                const QuantizedDistribution qd = QuantizedDistribution::from_probs(model_out.probs);
                if (trace) trace->dists.push_back(qd);

                int s;
                if (decoding) {
                    s = sink.transfer(qd, -1);
                    if (s == 0)
                        throw FormatError("decoded an empty occupancy symbol at level " + std::to_string(l) +
                                          ", octant " + std::to_string(ci));
                    cur.symbols.push_back(uint8_t(s));
                } else {
                    s = cur.symbols[ci];
                    sink.transfer(qd, s);
                }
                res.symbols += 1;
                res.est_bits += qd.bits_for(s);
                sib.add_sibling(k, uint8_t(s));
                if (keep_han) han_cur[ci] = std::move(model_out.h_child);
                ++ci;
            }
        }
        if (!decoding && ci != cur.count()) throw InternalError("traversal out of sync with tree");
        han_prev = std::move(han_cur);
    }

    if (decoding) {
        // materialize the leaf level
        OctreeLevel& parent = levels[size_t(depth) - 1];
        OctreeLevel leaves;
        for (size_t pi = 0; pi < parent.count(); ++pi)
            for (int k = 0; k < 8; ++k)
                if (parent.symbols[pi] & (1u << k)) leaves.codes.push_back(parent.codes[pi] << 3 | uint64_t(k));
        levels[size_t(depth)] = std::move(leaves);
    }
    return res;
}

}  // namespace

EncodeResult encode_frame(const PointCloud& cloud, const Octree& tree, const ModelBundle& bundle, uint16_t flags,
                          CodecTrace* trace) {
    const int depth = tree.depth();
    if (!bundle.supports_code_depth(depth))
        throw ValidationError("bundle cannot code depth " + std::to_string(depth) + "; it has " +
                              bundle.supported_levels_str());
    if (cloud.empty()) throw ValidationError("encode_frame: empty cloud");

    std::vector<OctreeLevel> levels;
    levels.reserve(size_t(depth) + 1);
    for (int l = 0; l <= depth; ++l) levels.push_back(tree.level(l));

    RangeEncoder enc;
    SymbolSink sink;
    sink.enc = &enc;
    WalkResult w = walk_frame(levels, depth, bundle, sink, trace);
    std::vector<uint8_t> payload = enc.finish();

    FrameHeader h;
    h.depth = uint8_t(depth);
    h.flags = flags;
    h.n_points = cloud.size();
    h.origin = tree.config().bounds.origin;
    h.side = tree.config().bounds.side;
    h.bundle_hash = bundle.hash();
    h.payload_len = payload.size();

    EncodeResult res;
    h.write(res.frame);
    res.frame.insert(res.frame.end(), payload.begin(), payload.end());
    res.report = make_report(payload.size(), cloud.size(), w.symbols, w.est_bits);
    return res;
}

DecodedFrame decode_frame(const std::vector<uint8_t>& frame, const ModelBundle& bundle, CodecTrace* trace) {
    FrameHeader h = FrameHeader::read(frame.data(), frame.size());
    if (h.depth < 1 || h.depth > kMaxOctreeDepth)
        throw FormatError("frame depth " + std::to_string(h.depth) + " out of range");
    if (!bundle.supports_code_depth(h.depth))
        throw ValidationError("bundle cannot decode depth " + std::to_string(h.depth) + "; it has " +
                              bundle.supported_levels_str());
    if (h.bundle_hash != bundle.hash())
        throw ValidationError("bundle hash mismatch: frame needs " + hex_digest(h.bundle_hash).substr(0, 12) +
                              "..., loaded bundle is " + hex_digest(bundle.hash()).substr(0, 12) + "...");
    if (h.n_points == 0) throw FormatError("frame claims zero points");
    if (frame.size() < FrameHeader::kSize + h.payload_len)
        throw FormatError("frame shorter than its declared payload (" + std::to_string(frame.size()) + " < " +
                          std::to_string(FrameHeader::kSize + h.payload_len) + " bytes)");

    std::vector<OctreeLevel> levels(size_t(h.depth) + 1);
    levels[0].codes = {0};

    RangeDecoder dec(frame.data() + FrameHeader::kSize, size_t(h.payload_len));
    SymbolSink sink;
    sink.dec = &dec;
    walk_frame(levels, h.depth, bundle, sink, trace);

    OctreeConfig cfg;
    cfg.depth = h.depth;
    cfg.bounds.origin = h.origin;
    cfg.bounds.side = h.side;

    // assemble via the symbol stream so all octree invariants re-apply
    std::vector<uint8_t> symbols;
    for (int l = 0; l < h.depth; ++l)
        symbols.insert(symbols.end(), levels[size_t(l)].symbols.begin(), levels[size_t(l)].symbols.end());
    DecodedFrame out{h, Octree::from_symbols(cfg, symbols)};
    return out;
}

void StaticHistogramModel::add_tree(const Octree& tree) {
    const int top = std::min(tree.depth() - 1, max_level());
    for (int l = 0; l <= top; ++l)
        for (uint8_t s : tree.level(l).symbols) counts_[size_t(l)][s] += 1;
}

void StaticHistogramModel::finalize() {
    dists_.clear();
    dists_.reserve(counts_.size());
    for (const auto& c : counts_) {
        uint64_t total = 0;
        for (uint64_t v : c) total += v;
        std::array<double, 256> p;
        for (int i = 0; i < 256; ++i) p[size_t(i)] = double(c[size_t(i)] + 1) / double(total + 256);
        dists_.push_back(QuantizedDistribution::from_probs(p));
    }
}

const QuantizedDistribution& StaticHistogramModel::level_dist(int l) const {
    if (dists_.empty()) throw InternalError("StaticHistogramModel not finalized");
    if (l < 0 || l >= int(dists_.size()))
        throw ValidationError("static model has no level " + std::to_string(l));
    return dists_[size_t(l)];
}

EncodeResult encode_frame_static(const PointCloud& cloud, const Octree& tree, const StaticHistogramModel& model) {
    if (tree.depth() - 1 > model.max_level())
        throw ValidationError("static model trained to level " + std::to_string(model.max_level()) +
                              ", tree needs " + std::to_string(tree.depth() - 1));
    RangeEncoder enc;
    uint64_t symbols = 0;
    double est = 0.0;
    for (int l = 0; l < tree.depth(); ++l) {
        const QuantizedDistribution& d = model.level_dist(l);
        for (uint8_t s : tree.level(l).symbols) {
            enc.encode(d, s);
            est += d.bits_for(s);
            ++symbols;
        }
    }
    std::vector<uint8_t> payload = enc.finish();

    FrameHeader h;
    h.depth = uint8_t(tree.depth());
    h.n_points = cloud.size();
    h.origin = tree.config().bounds.origin;
    h.side = tree.config().bounds.side;
    h.payload_len = payload.size();

    EncodeResult res;
    h.write(res.frame);
    res.frame.insert(res.frame.end(), payload.begin(), payload.end());
    res.report = make_report(payload.size(), cloud.size(), symbols, est);
    return res;
}

}  // namespace pcz

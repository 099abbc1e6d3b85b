// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pcz/context.hpp"
#include "pcz/neural.hpp"
#include "pcz/sha256.hpp"

namespace pcz {

// Architecture knobs. Defaults are the shipping configuration; tests and the
// acceptance suite use slimmer widths. Everything here feeds the arch hash,
// so a frame can only be decoded by a bundle with identical wiring.
struct ModelConfig {
    int k = 9;                             // neighbor window side
    std::array<int, 3> conv_ch = {16, 32, 64};
    std::array<int, 3> conv_stride = {1, 2, 1};
    int h_neigh = 64;
    int sib_conv_ch = 16;
    int sib_conv_stride = 1;
    int h_sib = 32;
    int d_an = 32;
    int embed = 16;
    int geo = 32;
    int header_hidden = 128;
    double lambda = 0.2;
    bool use_sibling = true;
    bool use_ancestor = true;
    bool use_surface = true;
    bool sibling_known_mask = false;

    std::string arch_string() const;
    Digest256 arch_hash() const;
};

// Conditioning inputs for one octant, all derivable causally at decode time.
struct CtxInputs {
    const BinBlock* v = nullptr;         // k^3 neighbor occupancy
    const BinBlock* vsib = nullptr;      // 4^3 sibling-children occupancy
    const BinBlock* vsib_known = nullptr;  // optional known mask channel
    OctantInfo info;
    const std::vector<double>* h_an = nullptr;  // null means "child of the root"
};

struct PredictOut {
    std::array<double, 256> probs;
    std::vector<double> h_child;
};

// Occupied voxel centers of a neighbor block in block-local coordinates
// (center octant at the origin, one voxel per unit).
std::vector<Vec3d> block_surface_points(const BinBlock& v);

// Closed-form least-squares fit of z = d.[x^2,y^2,xy,x,y,1]; ridge fallback
// (1e-8) when the normal equations are rank deficient.
struct QuadricFit {
    std::array<double, 6> delta;
    bool ridged = false;
};
QuadricFit solve_quadratic_lsq(const std::vector<Vec3d>& pts);
double quadric_residual(const std::array<double, 6>& delta, const std::vector<Vec3d>& pts);

// One entropy model; each octree level trains its own instance.
class LevelModel {
public:
    LevelModel(const ModelConfig& cfg, int level, uint64_t seed);

    struct FwdNodes {
        int logits = -1;
        int h_child = -1;
        int h_hat = -1;
        int h_neigh = -1;
        int delta = -1;
        int ce = -1;       // -1 unless a target symbol was supplied
        int surface = -1;  // -1 when the surface loss is off or underdetermined
    };
    FwdNodes forward(Tape& tape, const CtxInputs& in, int target_symbol) const;

    PredictOut predict(const CtxInputs& in) const;

    // The feature handed to this octant's children as their ancestor input.
    std::vector<double> ancestor_for_children(const BinBlock& v, const OctantInfo& info) const;

    // Introspection helpers for tests and tooling.
    struct NeighborFeatures {
        std::vector<double> h_neigh;
        std::vector<double> h_feat;
    };
    NeighborFeatures neighbor_features(const BinBlock& v) const;
    std::vector<double> sibling_features(const BinBlock& vsib, const BinBlock* known) const;
    struct AncestorPass {
        std::vector<double> h_child;
        std::vector<double> h_hat;
    };
    AncestorPass ancestor_pass(const std::vector<double>& h_neigh, const OctantInfo& info) const;
    struct SurfaceHead {
        std::vector<double> h_geo;
        std::array<double, 6> delta;
    };
    SurfaceHead surface_head(const BinBlock& v) const;

    const ModelConfig& config() const { return cfg_; }
    int level() const { return level_; }
    ParamRegistry& params() { return reg_; }
    const ParamRegistry& params() const { return reg_; }

    void serialize(std::vector<uint8_t>& out) const;
    void deserialize(const std::vector<uint8_t>& bytes, const std::string& origin);

private:
    friend class Tape;
    int trunk_nodes(Tape& tape, const BinBlock& v, int& h_feat_out) const;  // returns h_neigh node
    int embed_node(Tape& tape, const OctantInfo& info) const;

    ModelConfig cfg_;
    int level_;
    DenseLayer embed_fc_, neigh_fc_, sib_fc_, phi1_, phi2_, gamma_, geo_fc_, delta_fc_;
    DenseLayer head1_, head2_, head3_, head4_;
    Conv3dLayer conv1_, conv2_, conv3_, sib_conv_;
    ParamRegistry reg_;
};

// Decoder-side refinement: neighbor trunk clone plus a 24-way head emitting
// one raw offset triple per potential child; callers bound it with
// tanh * half child cell.
class RefineModel {
public:
    RefineModel(const ModelConfig& cfg, int level, uint64_t seed);

    int forward(Tape& tape, const BinBlock& v, const OctantInfo& info) const;  // raw 24-vector node
    std::array<double, 24> raw_offsets(const BinBlock& v, const OctantInfo& info) const;

    int level() const { return level_; }
    ParamRegistry& params() { return reg_; }
    const ParamRegistry& params() const { return reg_; }
    void serialize(std::vector<uint8_t>& out) const;
    void deserialize(const std::vector<uint8_t>& bytes, const std::string& origin);

private:
    ModelConfig cfg_;
    int level_;
    Conv3dLayer conv1_, conv2_, conv3_;
    DenseLayer fc_, embed_fc_, head_;
    ParamRegistry reg_;
};

struct BundleConfig {
    ModelConfig model;
    int max_level = 0;               // symbol models exist for levels 1..max_level
    std::vector<int> refine_levels;  // depths with a trained refinement model
    uint64_t seed = 1;
};

// All trained state needed to code and reconstruct: one entropy model per
// level plus optional refinement models, fingerprinted as a whole.
class ModelBundle {
public:
    static ModelBundle fresh(const BundleConfig& cfg);
    static ModelBundle load(const std::string& dir);
    void save(const std::string& dir) const;

    const BundleConfig& config() const { return cfg_; }
    int max_level() const { return cfg_.max_level; }

    bool supports_code_depth(int depth) const { return depth >= 1 && depth - 1 <= cfg_.max_level; }
    bool supports_predict_depth(int depth) const { return depth >= 1 && depth <= cfg_.max_level; }

    LevelModel& level(int l);
    const LevelModel& level(int l) const;
    RefineModel* refine(int depth);
    const RefineModel* refine(int depth) const;
    RefineModel& add_refine(int depth);

    std::string supported_levels_str() const;

    // Root ancestor feature: level-1 model applied to the root's trivial
    // context; constant per bundle.
    std::vector<double> root_ancestor() const;

    Digest256 hash() const;  // recomputed from current parameters

private:
    ModelBundle() = default;
    std::string manifest_text() const;

    BundleConfig cfg_;
    std::vector<std::unique_ptr<LevelModel>> levels_;
    std::map<int, std::unique_ptr<RefineModel>> refine_;
};

}  // namespace pcz

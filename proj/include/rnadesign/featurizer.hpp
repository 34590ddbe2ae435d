#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rnadesign/rng.hpp"
#include "rnadesign/structure.hpp"
#include "rnadesign/tensor.hpp"

namespace rnadesign {

// Fixed feature packing (documented in docs/formats.md):
//   node scalars [38] = rbf16(|P-C4'|) ++ rbf16(|N-C4'|)
//                       ++ [sin,cos] bond angle P-C4'-N
//                       ++ [sin,cos] eta ++ [sin,cos] theta
//   node vectors [4]  = fwd backbone, rev backbone, unit(P-C4'), unit(N-C4')
//   edge scalars [64] = rbf32(|x_j - x_i|) ++ posenc32(j - i)
//   edge vectors [1]  = unit(x_j - x_i)
inline constexpr int kNodeScalarDim = 38;
inline constexpr int kNodeVectorDim = 4;
inline constexpr int kEdgeScalarDim = 64;
inline constexpr int kEdgeVectorDim = 1;

struct FeaturizerConfig {
    int knn = 32;
    int edge_rbf_count = 32;
    int node_rbf_count = 16;
    double rbf_min = 0.0;
    double rbf_max = 20.0;
    int posenc_count = 32;
    double posenc_base = 10000.0;
    double noise_sigma = 0.1;  // used only when a noise rng is supplied
};

// Gaussian radial basis over [lo, hi]; width equals the center spacing.
std::vector<double> rbf(double d, int count, double lo = 0.0, double hi = 20.0);
inline std::vector<double> rbf32(double d) { return rbf(d, 32); }

// Interleaved [sin, cos] sinusoidal encoding of a signed offset.
std::vector<double> posenc(std::int64_t offset, int count, double base = 10000.0);
inline std::vector<double> posenc32(std::int64_t offset) { return posenc(offset, 32); }

// One featurized conformation.
struct GeometricGraph {
    std::int64_t n = 0;
    std::vector<Vec3> coords;                 // bead centroid per node
    std::vector<int> orig_index;              // node -> position in the chain
    Tensor node_s;                            // [n, 38]
    Tensor node_v;                            // [n, 4, 3]
    std::vector<std::pair<int, int>> edges;   // (src j, dst i)
    Tensor edge_s;                            // [E, 64]
    Tensor edge_v;                            // [E, 1, 3]
};

// A stacked conformational ensemble over one union edge list.
struct MultiGraph {
    std::int64_t n = 0;
    std::int64_t k = 0;
    std::string sequence;                     // bases of the kept nodes
    std::vector<int> orig_index;
    Tensor node_s;                            // [n, k, 38]
    Tensor node_v;                            // [n, k, 4, 3]
    std::vector<std::pair<int, int>> edges;   // union, sorted by (dst, src)
    std::vector<std::vector<bool>> edge_state_mask;  // [E][k]
    Tensor edge_s;                            // [E, k, 64]
    Tensor edge_v;                            // [E, k, 1, 3]
};

// Per-nucleotide mean of the three bead coordinates, unmasked residues only.
std::vector<Vec3> centroid_coords(const RnaStructure& s);

// i.i.d. Gaussian noise per coordinate component (training only; callers
// bypass this on the inference path).
std::vector<Vec3> add_noise(const std::vector<Vec3>& coords, double sigma, RngStream& rng);

// Directed edges j -> i from the min(kmax, n-1) nearest neighbors of i;
// distance ties break toward the smaller source index.
std::vector<std::pair<int, int>> knn_edges(const std::vector<Vec3>& coords, int kmax);

// Node geometric features; `keep` selects the nodes (defaults to s.mask).
std::pair<Tensor, Tensor> node_features(const RnaStructure& s,
                                        const std::vector<std::array<Vec3, 3>>& beads,
                                        const std::vector<int>& orig_index,
                                        const FeaturizerConfig& cfg);

std::pair<Tensor, Tensor> edge_features(const std::vector<Vec3>& coords,
                                        const std::vector<std::pair<int, int>>& edges,
                                        const std::vector<int>& orig_index,
                                        const FeaturizerConfig& cfg);

// Full single-state pipeline. When noise_rng is non-null, Gaussian noise of
// cfg.noise_sigma is applied to every bead coordinate first. `keep` restricts
// the node set (nullptr: use s.mask).
GeometricGraph featurize(const RnaStructure& s, const FeaturizerConfig& cfg,
                         RngStream* noise_rng = nullptr,
                         const std::vector<bool>* keep = nullptr);

// Stacks per-state features along axis 1 and unions adjacencies; absent-state
// edge features are zero-filled and masked out of aggregation.
MultiGraph build_multigraph(const std::vector<GeometricGraph>& graphs);

// Featurizes the ensemble's states over their common unmasked node set.
MultiGraph featurize_ensemble(const Ensemble& e, const FeaturizerConfig& cfg,
                              RngStream* noise_rng = nullptr);

// Shape-and-values dump for golden tests and the featurize subcommand.
std::string multigraph_to_json(const MultiGraph& mg);

}  // namespace rnadesign

#include "rnadesign/featurizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace rnadesign {

std::vector<double> rbf(double d, int count, double lo, double hi) {
    if (count < 2) throw std::invalid_argument("rbf: need at least 2 bases");
    std::vector<double> out(static_cast<std::size_t>(count));
    const double w = (hi - lo) / static_cast<double>(count - 1);
    for (int m = 0; m < count; ++m) {
        const double c = lo + w * static_cast<double>(m);
        const double t = (d - c) / w;
        out[static_cast<std::size_t>(m)] = std::exp(-t * t);
    }
    return out;
}

std::vector<double> posenc(std::int64_t offset, int count, double base) {
    if (count < 2 || count % 2) throw std::invalid_argument("posenc: count must be even");
    std::vector<double> out(static_cast<std::size_t>(count));
    const int pairs = count / 2;
    for (int m = 0; m < pairs; ++m) {
        const double freq = std::pow(base, -2.0 * static_cast<double>(m) / count);
        const double x = static_cast<double>(offset) * freq;
        out[static_cast<std::size_t>(2 * m)] = std::sin(x);
        out[static_cast<std::size_t>(2 * m + 1)] = std::cos(x);
    }
    return out;
}

std::vector<Vec3> centroid_coords(const RnaStructure& s) {
    std::vector<Vec3> out;
    out.reserve(s.length());
    for (std::size_t i = 0; i < s.length(); ++i) {
        if (!s.mask[i]) continue;
        out.push_back((1.0 / 3.0) * (s.beads[i][0] + s.beads[i][1] + s.beads[i][2]));
    }
    return out;
}

std::vector<Vec3> add_noise(const std::vector<Vec3>& coords, double sigma, RngStream& rng) {
    std::vector<Vec3> out = coords;
    if (sigma == 0.0) return out;
    for (auto& p : out)
        for (int c = 0; c < 3; ++c) p[c] += rng.normal(0.0, sigma);
    return out;
}

std::vector<std::pair<int, int>> knn_edges(const std::vector<Vec3>& coords, int kmax) {
    const int n = static_cast<int>(coords.size());
    if (n < 2) throw std::invalid_argument("knn_edges: need at least 2 nodes");
    std::vector<std::pair<int, int>> edges;
    const int k = std::min<int>(kmax, n - 1);
    edges.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(k));
    std::vector<std::pair<double, int>> cand(static_cast<std::size_t>(n - 1));
    for (int i = 0; i < n; ++i) {
        std::size_t m = 0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            cand[m++] = {distance(coords[i], coords[j]), j};
        }
        std::sort(cand.begin(), cand.end());  // ties fall to the smaller index
        for (int t = 0; t < k; ++t) edges.emplace_back(cand[static_cast<std::size_t>(t)].second, i);
    }
    return edges;
}

namespace {

void put(Tensor& t, std::int64_t row, std::int64_t col, double v) {
    t.data()[static_cast<std::size_t>(row * t.dim(-1) + col)] = v;
}

}  // namespace

std::pair<Tensor, Tensor> node_features(const RnaStructure& s,
                                        const std::vector<std::array<Vec3, 3>>& beads,
                                        const std::vector<int>& orig_index,
                                        const FeaturizerConfig& cfg) {
    const std::int64_t n = static_cast<std::int64_t>(orig_index.size());
    const int nrbf = cfg.node_rbf_count;
    const std::int64_t sdim = 2 * nrbf + 6;
    Tensor node_s(Shape{n, sdim});
    Tensor node_v(Shape{n, kNodeVectorDim, 3});

    // Centroids of the kept nodes, graph order.
    std::vector<Vec3> x(static_cast<std::size_t>(n));
    for (std::int64_t g = 0; g < n; ++g) {
        const auto& b = beads[static_cast<std::size_t>(orig_index[static_cast<std::size_t>(g)])];
        x[static_cast<std::size_t>(g)] = (1.0 / 3.0) * (b[0] + b[1] + b[2]);
    }
    auto contiguous = [&](std::int64_t a, std::int64_t b2) {
        return b2 >= 0 && b2 < n &&
               orig_index[static_cast<std::size_t>(b2)] ==
                   orig_index[static_cast<std::size_t>(a)] + (b2 > a ? 1 : -1);
    };

    auto set_vec = [&](std::int64_t g, int ch, const Vec3& v) {
        auto& d = node_v.data();
        const std::size_t off = static_cast<std::size_t>((g * kNodeVectorDim + ch) * 3);
        d[off] = v[0];
        d[off + 1] = v[1];
        d[off + 2] = v[2];
    };

    for (std::int64_t g = 0; g < n; ++g) {
        const std::size_t oi = static_cast<std::size_t>(orig_index[static_cast<std::size_t>(g)]);
        const Vec3 p = beads[oi][kBeadP], c4 = beads[oi][kBeadC4], nb = beads[oi][kBeadN];

        // Vector channels.
        Vec3 fwd = {0, 0, 0}, rev = {0, 0, 0};
        if (contiguous(g, g + 1)) fwd = unit_or_zero(x[g + 1] - x[g]);
        if (contiguous(g, g - 1)) rev = unit_or_zero(x[g] - x[g - 1]);
        set_vec(g, 0, fwd);
        set_vec(g, 1, rev);
        set_vec(g, 2, unit_or_zero(p - c4));
        set_vec(g, 3, unit_or_zero(nb - c4));

        // Scalar channels: bead-distance RBFs.
        std::int64_t col = 0;
        for (double v : rbf(distance(p, c4), nrbf, cfg.rbf_min, cfg.rbf_max))
            put(node_s, g, col++, v);
        for (double v : rbf(distance(nb, c4), nrbf, cfg.rbf_min, cfg.rbf_max))
            put(node_s, g, col++, v);

        // Bond angle at C4'.
        const double ang = bond_angle(p, c4, nb);
        put(node_s, g, col++, std::sin(ang));
        put(node_s, g, col++, std::cos(ang));

        // Pseudotorsions over consecutive (P, C4') beads:
        //   eta:   C4'(i-1) - P(i) - C4'(i) - P(i+1)
        //   theta: P(i) - C4'(i) - P(i+1) - C4'(i+1)
        double eta_s = 0, eta_c = 0, theta_s = 0, theta_c = 0;
        if (contiguous(g, g - 1) && contiguous(g, g + 1)) {
            const std::size_t prev = oi - 1, next = oi + 1;
            const double eta =
                dihedral(beads[prev][kBeadC4], p, c4, beads[next][kBeadP]);
            eta_s = std::sin(eta);
            eta_c = std::cos(eta);
        }
        if (contiguous(g, g + 1)) {
            const std::size_t next = oi + 1;
            const double theta = dihedral(p, c4, beads[next][kBeadP], beads[next][kBeadC4]);
            theta_s = std::sin(theta);
            theta_c = std::cos(theta);
        }
        put(node_s, g, col++, eta_s);
        put(node_s, g, col++, eta_c);
        put(node_s, g, col++, theta_s);
        put(node_s, g, col++, theta_c);
    }
    return {node_s, node_v};
}

std::pair<Tensor, Tensor> edge_features(const std::vector<Vec3>& coords,
                                        const std::vector<std::pair<int, int>>& edges,
                                        const std::vector<int>& orig_index,
                                        const FeaturizerConfig& cfg) {
    const std::int64_t e = static_cast<std::int64_t>(edges.size());
    const std::int64_t sdim = cfg.edge_rbf_count + cfg.posenc_count;
    Tensor edge_s(Shape{e, sdim});
    Tensor edge_v(Shape{e, kEdgeVectorDim, 3});
    for (std::int64_t t = 0; t < e; ++t) {
        const auto [j, i] = edges[static_cast<std::size_t>(t)];
        const Vec3 d = coords[static_cast<std::size_t>(j)] - coords[static_cast<std::size_t>(i)];
        const Vec3 u = unit_or_zero(d);
        for (int c = 0; c < 3; ++c) edge_v.data()[static_cast<std::size_t>(t * 3 + c)] = u[c];
        std::int64_t col = 0;
        for (double v : rbf(norm(d), cfg.edge_rbf_count, cfg.rbf_min, cfg.rbf_max))
            put(edge_s, t, col++, v);
        const std::int64_t off = orig_index[static_cast<std::size_t>(j)] -
                                 orig_index[static_cast<std::size_t>(i)];
        for (double v : posenc(off, cfg.posenc_count, cfg.posenc_base))
            put(edge_s, t, col++, v);
    }
    return {edge_s, edge_v};
}

GeometricGraph featurize(const RnaStructure& s, const FeaturizerConfig& cfg,
                         RngStream* noise_rng, const std::vector<bool>* keep) {
    const std::vector<bool>& use = keep ? *keep : s.mask;
    if (use.size() != s.length()) throw std::invalid_argument("featurize: keep mask length");

    GeometricGraph g;
    for (std::size_t i = 0; i < s.length(); ++i)
        if (use[i]) g.orig_index.push_back(static_cast<int>(i));
    g.n = static_cast<std::int64_t>(g.orig_index.size());
    if (g.n < 2) throw std::invalid_argument("featurize: fewer than 2 usable nucleotides");

    // Noise is drawn per bead coordinate so every downstream feature sees the
    // perturbed geometry.
    std::vector<std::array<Vec3, 3>> beads = s.beads;
    if (noise_rng && cfg.noise_sigma > 0.0) {
        std::vector<Vec3> flat;
        flat.reserve(3 * beads.size());
        for (const auto& b : beads) {
            flat.push_back(b[0]);
            flat.push_back(b[1]);
            flat.push_back(b[2]);
        }
        flat = add_noise(flat, cfg.noise_sigma, *noise_rng);
        for (std::size_t i = 0; i < beads.size(); ++i)
            beads[i] = {flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]};
    }

    g.coords.reserve(static_cast<std::size_t>(g.n));
    for (int oi : g.orig_index) {
        const auto& b = beads[static_cast<std::size_t>(oi)];
        g.coords.push_back((1.0 / 3.0) * (b[0] + b[1] + b[2]));
    }
    auto [ns, nv] = node_features(s, beads, g.orig_index, cfg);
    g.node_s = ns;
    g.node_v = nv;
    g.edges = knn_edges(g.coords, cfg.knn);
    auto [es, ev] = edge_features(g.coords, g.edges, g.orig_index, cfg);
    g.edge_s = es;
    g.edge_v = ev;
    return g;
}

MultiGraph build_multigraph(const std::vector<GeometricGraph>& graphs) {
    if (graphs.empty()) throw std::invalid_argument("build_multigraph: no graphs");
    const std::int64_t n = graphs[0].n;
    for (const auto& g : graphs) {
        if (g.n != n || g.orig_index != graphs[0].orig_index)
            throw std::invalid_argument("build_multigraph: node sets differ across states");
    }
    const std::int64_t k = static_cast<std::int64_t>(graphs.size());
    const std::int64_t sdim = graphs[0].node_s.dim(-1);
    const std::int64_t edim = graphs[0].edge_s.dim(-1);

    MultiGraph mg;
    mg.n = n;
    mg.k = k;
    mg.orig_index = graphs[0].orig_index;

    // Union adjacency, sorted by (dst, src) for determinism.
    std::set<std::pair<int, int>> union_set;
    for (const auto& g : graphs)
        for (const auto& [j, i] : g.edges) union_set.insert({i, j});
    mg.edges.reserve(union_set.size());
    for (const auto& [i, j] : union_set) mg.edges.emplace_back(j, i);
    const std::int64_t eu = static_cast<std::int64_t>(mg.edges.size());

    std::map<std::pair<int, int>, std::int64_t> union_pos;
    for (std::int64_t t = 0; t < eu; ++t) union_pos[mg.edges[static_cast<std::size_t>(t)]] = t;

    mg.node_s = Tensor(Shape{n, k, sdim});
    mg.node_v = Tensor(Shape{n, k, kNodeVectorDim, 3});
    mg.edge_s = Tensor(Shape{eu, k, edim});
    mg.edge_v = Tensor(Shape{eu, k, kEdgeVectorDim, 3});
    mg.edge_state_mask.assign(static_cast<std::size_t>(eu),
                              std::vector<bool>(static_cast<std::size_t>(k), false));

    for (std::int64_t s = 0; s < k; ++s) {
        const auto& g = graphs[static_cast<std::size_t>(s)];
        for (std::int64_t i = 0; i < n; ++i) {
            std::copy_n(g.node_s.data().begin() + i * sdim, sdim,
                        mg.node_s.data().begin() + (i * k + s) * sdim);
            std::copy_n(g.node_v.data().begin() + i * kNodeVectorDim * 3, kNodeVectorDim * 3,
                        mg.node_v.data().begin() + (i * k + s) * kNodeVectorDim * 3);
        }
        for (std::size_t t = 0; t < g.edges.size(); ++t) {
            const std::int64_t u = union_pos.at(g.edges[t]);
            mg.edge_state_mask[static_cast<std::size_t>(u)][static_cast<std::size_t>(s)] = true;
            std::copy_n(g.edge_s.data().begin() + static_cast<std::int64_t>(t) * edim, edim,
                        mg.edge_s.data().begin() + (u * k + s) * edim);
            std::copy_n(g.edge_v.data().begin() + static_cast<std::int64_t>(t) * 3, 3,
                        mg.edge_v.data().begin() + (u * k + s) * 3);
        }
    }
    return mg;
}

MultiGraph featurize_ensemble(const Ensemble& e, const FeaturizerConfig& cfg,
                              RngStream* noise_rng) {
    e.validate();
    std::vector<bool> common = e.states.front().mask;
    for (const auto& s : e.states)
        for (std::size_t i = 0; i < common.size(); ++i)
            common[i] = common[i] && s.mask[i];
    std::vector<GeometricGraph> graphs;
    graphs.reserve(e.states.size());
    for (const auto& s : e.states) graphs.push_back(featurize(s, cfg, noise_rng, &common));
    MultiGraph mg = build_multigraph(graphs);
    for (int oi : mg.orig_index) mg.sequence.push_back(e.sequence[static_cast<std::size_t>(oi)]);
    return mg;
}

std::string multigraph_to_json(const MultiGraph& mg) {
    nlohmann::json j;
    j["n"] = mg.n;
    j["k"] = mg.k;
    j["sequence"] = mg.sequence;
    j["orig_index"] = mg.orig_index;
    j["node_s"] = {{"shape", mg.node_s.shape()}, {"data", mg.node_s.data()}};
    j["node_v"] = {{"shape", mg.node_v.shape()}, {"data", mg.node_v.data()}};
    std::vector<std::vector<int>> edges;
    edges.reserve(mg.edges.size());
    for (auto& [src, dst] : mg.edges) edges.push_back({src, dst});
    j["edges"] = edges;
    std::vector<std::vector<int>> mask;
    for (auto& row : mg.edge_state_mask) mask.emplace_back(row.begin(), row.end());
    j["edge_state_mask"] = mask;
    j["edge_s"] = {{"shape", mg.edge_s.shape()}, {"data", mg.edge_s.data()}};
    j["edge_v"] = {{"shape", mg.edge_v.shape()}, {"data", mg.edge_v.data()}};
    return j.dump() + "\n";
}

}  // namespace rnadesign

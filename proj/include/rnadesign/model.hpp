#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rnadesign/featurizer.hpp"
#include "rnadesign/gvp.hpp"
#include "rnadesign/rng.hpp"
#include "rnadesign/tensor.hpp"

namespace rnadesign {

enum class DecoderKind { AR, NAR };

std::string decoder_kind_name(DecoderKind k);
DecoderKind decoder_kind_from_name(const std::string& name);

struct ModelConfig {
    int node_s_dim = 128;
    int node_v_dim = 16;
    int edge_s_dim = 64;
    int edge_v_dim = 4;
    int encoder_layers = 4;
    int decoder_layers = 4;
    int ff_hidden_mult = 2;  // scalar widening inside the per-layer feed-forward
    double dropout = 0.5;
    int seq_embed_dim = 4;
    DecoderKind decoder_kind = DecoderKind::AR;
    // Input feature widths; must match the featurizer's packing.
    int in_node_s = kNodeScalarDim;
    int in_node_v = kNodeVectorDim;
    int in_edge_s = kEdgeScalarDim;
    int in_edge_v = kEdgeVectorDim;

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

// One message-passing layer: 2-GVP message function, sum aggregation over
// in-edges, residual + scalar layer norm, then a 2-GVP feed-forward block
// with its own residual + norm. Works on [n, k, ...] (encoder) and [n, ...]
// (decoder) tensors alike since ops treat leading axes generically.
struct ConvLayer {
    Gvp msg1, msg2, ff1, ff2;
    Tensor ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;

    // emit_vectors=false ends the vector track: the feed-forward consumes the
    // vector norms but produces scalars only (used by the last layer ahead of
    // a scalar output head, so no parameter is cut off from the loss).
    static ConvLayer init(int ns, int nv, int es, int ev, int ff_mult, RngStream& rng,
                          bool emit_vectors = true);
    void collect_params(const std::string& prefix,
                        std::vector<std::pair<std::string, Tensor*>>& out);

    struct GraphRefs {
        std::int64_t n = 0;
        const std::vector<std::int64_t>* src = nullptr;
        const std::vector<std::int64_t>* dst = nullptr;
        const Tensor* edge_s = nullptr;
        const Tensor* edge_v = nullptr;
        // Optional per-state message masks (encoder); 0/1 constants shaped
        // like the message outputs.
        const Tensor* mask_s = nullptr;
        const Tensor* mask_v = nullptr;
        // Autoregressive source substitution (decoder): on non-causal edges
        // the source features come from these frozen tensors instead of the
        // evolving ones. src_stacked indexes into [current; frozen].
        const Tensor* ar_s = nullptr;
        const Tensor* ar_v = nullptr;
        const std::vector<std::int64_t>* src_stacked = nullptr;
    };
    std::pair<Tensor, Tensor> forward(const Tensor& s, const Tensor& v, const GraphRefs& g,
                                      double dropout, bool training, RngStream* rng) const;
};

class Model {
public:
    Model() = default;  // empty shell; assign a real model before use
    Model(const ModelConfig& cfg, std::uint64_t init_seed);

    const ModelConfig& config() const { return cfg_; }
    std::uint64_t init_seed() const { return init_seed_; }

    struct Encoded {
        std::int64_t n = 0;
        Tensor node_s;  // [n, ns]    pooled over conformers
        Tensor node_v;  // [n, nv, 3]
        std::vector<std::int64_t> src, dst;
        std::vector<int> seq_pos;  // node -> position in the chain (5'->3')
        Tensor edge_s;  // [E, es]    masked mean over conformers
        Tensor edge_v;  // [E, ev, 3]
    };

    // Embeds inputs, runs the encoder layers per state over the union edge
    // list, and mean-pools the conformer axis.
    Encoded encode(const MultiGraph& mg, bool training = false, RngStream* rng = nullptr) const;

    // bases[i] in {0..3}, or -1 for a not-yet-decoded position (zero
    // embedding). AR decoding consumes bases of positions j < i only; the
    // NAR head ignores bases entirely.
    Tensor decode(const Encoded& enc, const std::vector<int>& bases, bool training = false,
                  RngStream* rng = nullptr) const;

    Tensor logits(const MultiGraph& mg, const std::vector<int>& bases, bool training = false,
                  RngStream* rng = nullptr) const;

    // Parameters in manifest order (stable across runs and saves).
    std::vector<std::pair<std::string, Tensor*>> params();
    std::vector<std::pair<std::string, const Tensor*>> params() const;
    std::int64_t param_count() const;
    void zero_grad();

private:
    ModelConfig cfg_;
    std::uint64_t init_seed_ = 0;
    Gvp node_embed_, edge_embed_;
    std::vector<ConvLayer> encoder_;
    std::vector<ConvLayer> decoder_;
    Tensor seq_embed_;           // [4, seq_embed_dim]
    Tensor head_w_, head_b_;     // [ns, 4], [4]
    Tensor nar_w1_, nar_b1_, nar_w2_, nar_b2_;
};

// Checkpoint file: magic "RNADCKPT", u64 little-endian JSON length, JSON
// header (config, seed, manifest, caller metadata), then the parameter
// block as little-endian 64-bit floats in manifest order.
void save_checkpoint(const std::string& path, const Model& model,
                     const std::string& meta_json = "{}");
Model load_checkpoint(const std::string& path, std::string* meta_json = nullptr);

}  // namespace rnadesign

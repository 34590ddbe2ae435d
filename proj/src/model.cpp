#include "rnadesign/model.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace rnadesign {

using Json = nlohmann::json;

std::string decoder_kind_name(DecoderKind k) { return k == DecoderKind::AR ? "AR" : "NAR"; }

DecoderKind decoder_kind_from_name(const std::string& name) {
    if (name == "AR") return DecoderKind::AR;
    if (name == "NAR") return DecoderKind::NAR;
    throw std::invalid_argument("unknown decoder kind: " + name);
}

std::string ModelConfig::to_json() const {
    Json j;
    j["node_s_dim"] = node_s_dim;
    j["node_v_dim"] = node_v_dim;
    j["edge_s_dim"] = edge_s_dim;
    j["edge_v_dim"] = edge_v_dim;
    j["encoder_layers"] = encoder_layers;
    j["decoder_layers"] = decoder_layers;
    j["ff_hidden_mult"] = ff_hidden_mult;
    j["dropout"] = dropout;
    j["seq_embed_dim"] = seq_embed_dim;
    j["decoder_kind"] = decoder_kind_name(decoder_kind);
    j["in_node_s"] = in_node_s;
    j["in_node_v"] = in_node_v;
    j["in_edge_s"] = in_edge_s;
    j["in_edge_v"] = in_edge_v;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    Json j = Json::parse(text);
    ModelConfig c;
    c.node_s_dim = j.value("node_s_dim", c.node_s_dim);
    c.node_v_dim = j.value("node_v_dim", c.node_v_dim);
    c.edge_s_dim = j.value("edge_s_dim", c.edge_s_dim);
    c.edge_v_dim = j.value("edge_v_dim", c.edge_v_dim);
    c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
    c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
    c.ff_hidden_mult = j.value("ff_hidden_mult", c.ff_hidden_mult);
    c.dropout = j.value("dropout", c.dropout);
    c.seq_embed_dim = j.value("seq_embed_dim", c.seq_embed_dim);
    c.decoder_kind = decoder_kind_from_name(j.value("decoder_kind", std::string("AR")));
    c.in_node_s = j.value("in_node_s", c.in_node_s);
    c.in_node_v = j.value("in_node_v", c.in_node_v);
    c.in_edge_s = j.value("in_edge_s", c.in_edge_s);
    c.in_edge_v = j.value("in_edge_v", c.in_edge_v);
    return c;
}

// ---- ConvLayer ---------------------------------------------------------------

ConvLayer ConvLayer::init(int ns, int nv, int es, int ev, int ff_mult, RngStream& rng,
                          bool emit_vectors) {
    ConvLayer l;
    l.msg1 = Gvp::init({2 * ns + es, 2 * nv + ev, ns, nv}, rng);
    l.msg2 = Gvp::init({ns, nv, ns, nv}, rng);
    l.ff1 = Gvp::init({ns, nv, ff_mult * ns, nv}, rng);
    l.ff2 = Gvp::init({ff_mult * ns, nv, ns, emit_vectors ? nv : 0}, rng);
    l.ln1_gamma = Tensor(Shape{ns}, 1.0);
    l.ln1_beta = Tensor(Shape{ns});
    l.ln2_gamma = Tensor(Shape{ns}, 1.0);
    l.ln2_beta = Tensor(Shape{ns});
    return l;
}

void ConvLayer::collect_params(const std::string& prefix,
                               std::vector<std::pair<std::string, Tensor*>>& out) {
    msg1.collect_params(prefix + ".msg1", out);
    msg2.collect_params(prefix + ".msg2", out);
    ff1.collect_params(prefix + ".ff1", out);
    ff2.collect_params(prefix + ".ff2", out);
    out.emplace_back(prefix + ".ln1_gamma", &ln1_gamma);
    out.emplace_back(prefix + ".ln1_beta", &ln1_beta);
    out.emplace_back(prefix + ".ln2_gamma", &ln2_gamma);
    out.emplace_back(prefix + ".ln2_beta", &ln2_beta);
}

namespace {

// Inverted dropout masks as plain constants; exact zeros keep masked paths
// exactly dead.
Tensor scalar_dropout_mask(const Shape& shape, double p, RngStream& rng) {
    Tensor m(shape);
    const double keep = 1.0 - p;
    for (auto& x : m.data()) x = rng.uniform() < keep ? 1.0 / keep : 0.0;
    return m;
}

Tensor apply_scalar_dropout(const Tensor& t, double p, bool training, RngStream* rng) {
    if (!training || p <= 0.0) return t;
    if (!rng) throw std::invalid_argument("dropout: training forward needs an rng");
    return mul(t, scalar_dropout_mask(t.shape(), p, *rng));
}

// Whole-vector-channel dropout: [..., nv, 3] channels zeroed as units.
Tensor apply_vector_dropout(const Tensor& v, double p, bool training, RngStream* rng) {
    if (!training || p <= 0.0) return v;
    if (!rng) throw std::invalid_argument("dropout: training forward needs an rng");
    Shape chan(v.shape().begin(), v.shape().end() - 1);
    Tensor m = scalar_dropout_mask(chan, p, *rng);
    return mul(v, expand_last3(m));
}

}  // namespace

std::pair<Tensor, Tensor> ConvLayer::forward(const Tensor& s, const Tensor& v,
                                             const GraphRefs& g, double dropout, bool training,
                                             RngStream* rng) const {
    // Eq-style message: Msg((s_i, v_i), (s_j, v_j), e_ij) as GVPs over the
    // concatenation (source, edge, destination). With ar_s set, non-causal
    // edges read their source features from the frozen tensors (indices in
    // src_stacked point past the current block).
    Tensor s_src, v_src;
    if (g.ar_s) {
        s_src = gather_rows(concat({s, *g.ar_s}, 0), *g.src_stacked);
        v_src = gather_rows(concat({v, *g.ar_v}, 0), *g.src_stacked);
    } else {
        s_src = gather_rows(s, *g.src);
        v_src = gather_rows(v, *g.src);
    }
    const Tensor s_dst = gather_rows(s, *g.dst);
    const Tensor v_dst = gather_rows(v, *g.dst);
    auto [h_s, h_v] = msg1.forward(concat({s_src, *g.edge_s, s_dst}, -1),
                                   concat({v_src, *g.edge_v, v_dst}, -2));
    auto [m_s, m_v] = msg2.forward(h_s, h_v);
    if (g.mask_s) m_s = mul(m_s, *g.mask_s);
    if (g.mask_v) m_v = mul(m_v, *g.mask_v);

    // Sum over in-neighbors; nodes without in-edges receive an exact zero.
    Tensor agg_s = scatter_sum_rows(m_s, *g.dst, g.n);
    Tensor agg_v = scatter_sum_rows(m_v, *g.dst, g.n);
    agg_s = apply_scalar_dropout(agg_s, dropout, training, rng);
    agg_v = apply_vector_dropout(agg_v, dropout, training, rng);

    Tensor s1 = layer_norm(add(s, agg_s), ln1_gamma, ln1_beta);
    Tensor v1 = vector_rms_norm(add(v, agg_v));

    auto [f_hidden_s, f_hidden_v] = ff1.forward(s1, v1);
    auto [f_s, f_v] = ff2.forward(f_hidden_s, f_hidden_v);
    f_s = apply_scalar_dropout(f_s, dropout, training, rng);

    Tensor s2 = layer_norm(add(s1, f_s), ln2_gamma, ln2_beta);
    if (!f_v.defined()) return {s2, Tensor()};  // vector track ends here
    f_v = apply_vector_dropout(f_v, dropout, training, rng);
    Tensor v2 = vector_rms_norm(add(v1, f_v));
    return {s2, v2};
}

// ---- Model ----------------------------------------------------------------------

Model::Model(const ModelConfig& cfg, std::uint64_t init_seed)
    : cfg_(cfg), init_seed_(init_seed) {
    RngStream rng = RngStream(init_seed).child("model_init");
    node_embed_ = Gvp::init({cfg.in_node_s, cfg.in_node_v, cfg.node_s_dim, cfg.node_v_dim},
                            rng);
    edge_embed_ = Gvp::init({cfg.in_edge_s, cfg.in_edge_v, cfg.edge_s_dim, cfg.edge_v_dim},
                            rng);
    for (int l = 0; l < cfg.encoder_layers; ++l) {
        // A NAR head reads pooled scalars only, so the encoder's last layer
        // ends the vector track; the AR decoder keeps consuming vectors.
        const bool emit = cfg.decoder_kind == DecoderKind::AR || l + 1 < cfg.encoder_layers;
        encoder_.push_back(ConvLayer::init(cfg.node_s_dim, cfg.node_v_dim, cfg.edge_s_dim,
                                           cfg.edge_v_dim, cfg.ff_hidden_mult, rng, emit));
    }
    if (cfg.decoder_kind == DecoderKind::AR) {
        seq_embed_ = kaiming_uniform({4, cfg.seq_embed_dim}, 4, rng);
        for (int l = 0; l < cfg.decoder_layers; ++l)
            decoder_.push_back(ConvLayer::init(cfg.node_s_dim, cfg.node_v_dim,
                                               cfg.edge_s_dim + cfg.seq_embed_dim,
                                               cfg.edge_v_dim, cfg.ff_hidden_mult, rng,
                                               l + 1 < cfg.decoder_layers));
        // Output head starts small so a fresh model predicts near-uniform
        // probabilities.
        head_w_ = kaiming_uniform({cfg.node_s_dim, 4}, cfg.node_s_dim, rng);
        for (auto& w : head_w_.data()) w *= 0.1;
        head_b_ = Tensor(Shape{4});
    } else {
        nar_w1_ = kaiming_uniform({cfg.node_s_dim, cfg.node_s_dim}, cfg.node_s_dim, rng);
        nar_b1_ = Tensor(Shape{cfg.node_s_dim});
        nar_w2_ = kaiming_uniform({cfg.node_s_dim, 4}, cfg.node_s_dim, rng);
        for (auto& w : nar_w2_.data()) w *= 0.1;
        nar_b2_ = Tensor(Shape{4});
    }
    for (auto& [name, t] : params()) t->set_requires_grad(true);
}

std::vector<std::pair<std::string, Tensor*>> Model::params() {
    std::vector<std::pair<std::string, Tensor*>> out;
    node_embed_.collect_params("node_embed", out);
    edge_embed_.collect_params("edge_embed", out);
    for (std::size_t l = 0; l < encoder_.size(); ++l)
        encoder_[l].collect_params("encoder." + std::to_string(l), out);
    if (cfg_.decoder_kind == DecoderKind::AR) {
        out.emplace_back("seq_embed", &seq_embed_);
        for (std::size_t l = 0; l < decoder_.size(); ++l)
            decoder_[l].collect_params("decoder." + std::to_string(l), out);
        out.emplace_back("head_w", &head_w_);
        out.emplace_back("head_b", &head_b_);
    } else {
        out.emplace_back("nar_w1", &nar_w1_);
        out.emplace_back("nar_b1", &nar_b1_);
        out.emplace_back("nar_w2", &nar_w2_);
        out.emplace_back("nar_b2", &nar_b2_);
    }
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> Model::params() const {
    std::vector<std::pair<std::string, const Tensor*>> out;
    for (auto& [name, t] : const_cast<Model*>(this)->params()) out.emplace_back(name, t);
    return out;
}

std::int64_t Model::param_count() const {
    std::int64_t n = 0;
    for (auto& [name, t] : params()) n += t->numel();
    return n;
}

void Model::zero_grad() {
    for (auto& [name, t] : params()) t->zero_grad();
}

Model::Encoded Model::encode(const MultiGraph& mg, bool training, RngStream* rng) const {
    const std::int64_t n = mg.n, k = mg.k;
    const std::int64_t e = static_cast<std::int64_t>(mg.edges.size());
    if (n < 1 || e < 1) throw std::invalid_argument("encode: empty graph");

    Encoded enc;
    enc.n = n;
    enc.seq_pos = mg.orig_index;
    enc.src.reserve(static_cast<std::size_t>(e));
    enc.dst.reserve(static_cast<std::size_t>(e));
    for (const auto& [j, i] : mg.edges) {
        enc.src.push_back(j);
        enc.dst.push_back(i);
    }

    auto [s, v] = node_embed_.forward(mg.node_s, mg.node_v);
    auto [es, ev] = edge_embed_.forward(mg.edge_s, mg.edge_v);

    // Per-state presence masks over message outputs; absent edges contribute
    // exactly nothing to their state's aggregation.
    Tensor mask_s(Shape{e, k, cfg_.node_s_dim});
    Tensor mask_v(Shape{e, k, cfg_.node_v_dim, 3});
    // Masked-mean weights for pooling edge features across states.
    Tensor wpool_s(Shape{e, k, cfg_.edge_s_dim});
    Tensor wpool_v(Shape{e, k, cfg_.edge_v_dim, 3});
    for (std::int64_t t = 0; t < e; ++t) {
        const auto& present = mg.edge_state_mask[static_cast<std::size_t>(t)];
        double count = 0;
        for (std::int64_t st = 0; st < k; ++st) count += present[static_cast<std::size_t>(st)];
        for (std::int64_t st = 0; st < k; ++st) {
            if (!present[static_cast<std::size_t>(st)]) continue;
            const double w = 1.0 / count;
            for (std::int64_t c = 0; c < cfg_.node_s_dim; ++c)
                mask_s.data()[((t * k + st) * cfg_.node_s_dim + c)] = 1.0;
            for (std::int64_t c = 0; c < cfg_.node_v_dim * 3; ++c)
                mask_v.data()[((t * k + st) * cfg_.node_v_dim * 3 + c)] = 1.0;
            for (std::int64_t c = 0; c < cfg_.edge_s_dim; ++c)
                wpool_s.data()[((t * k + st) * cfg_.edge_s_dim + c)] = w;
            for (std::int64_t c = 0; c < cfg_.edge_v_dim * 3; ++c)
                wpool_v.data()[((t * k + st) * cfg_.edge_v_dim * 3 + c)] = w;
        }
    }

    ConvLayer::GraphRefs refs;
    refs.n = n;
    refs.src = &enc.src;
    refs.dst = &enc.dst;
    refs.edge_s = &es;
    refs.edge_v = &ev;
    refs.mask_s = &mask_s;
    refs.mask_v = &mask_v;
    for (const auto& layer : encoder_) {
        auto [ns, nv] = layer.forward(s, v, refs, cfg_.dropout, training, rng);
        s = ns;
        v = nv;
    }

    // Deep-Set pooling over the conformer axis (axis 1).
    enc.node_s = reduce(Reduce::Mean, s, 1);
    if (v.defined()) enc.node_v = reduce(Reduce::Mean, v, 1);
    enc.edge_s = reduce(Reduce::Sum, mul(es, wpool_s), 1);
    enc.edge_v = reduce(Reduce::Sum, mul(ev, wpool_v), 1);
    return enc;
}

Tensor Model::decode(const Encoded& enc, const std::vector<int>& bases, bool training,
                     RngStream* rng) const {
    if (static_cast<std::int64_t>(bases.size()) != enc.n)
        throw std::invalid_argument("decode: sequence length mismatch");

    if (cfg_.decoder_kind == DecoderKind::NAR) {
        // One-shot per-node MLP on pooled scalar features.
        return linear(relu(linear(enc.node_s, nar_w1_, nar_b1_)), nar_w2_, nar_b2_);
    }

    // Clamped indices + a 0/1 known-mask give unknown positions an exactly
    // zero embedding.
    const std::int64_t n = enc.n;
    std::vector<std::int64_t> clamped(static_cast<std::size_t>(n));
    Tensor known(Shape{n, cfg_.seq_embed_dim});
    for (std::int64_t i = 0; i < n; ++i) {
        const int b = bases[static_cast<std::size_t>(i)];
        if (b > 3) throw std::invalid_argument("decode: base index out of range");
        clamped[static_cast<std::size_t>(i)] = b < 0 ? 0 : b;
        if (b >= 0)
            for (int c = 0; c < cfg_.seq_embed_dim; ++c)
                known.data()[static_cast<std::size_t>(i * cfg_.seq_embed_dim + c)] = 1.0;
    }
    Tensor emb = mul(gather_rows(seq_embed_, clamped), known);

    // Causality: the source embedding reaches an edge only when the source
    // precedes the destination in sequence (5'->3') order.
    const std::int64_t e = static_cast<std::int64_t>(enc.src.size());
    Tensor causal(Shape{e, cfg_.seq_embed_dim});
    for (std::int64_t t = 0; t < e; ++t) {
        const int ps = enc.seq_pos[static_cast<std::size_t>(enc.src[static_cast<std::size_t>(t)])];
        const int pd = enc.seq_pos[static_cast<std::size_t>(enc.dst[static_cast<std::size_t>(t)])];
        if (ps < pd)
            for (int c = 0; c < cfg_.seq_embed_dim; ++c)
                causal.data()[static_cast<std::size_t>(t * cfg_.seq_embed_dim + c)] = 1.0;
    }
    Tensor dec_edge_s = concat({enc.edge_s, mul(gather_rows(emb, enc.src), causal)}, -1);

    // Non-causal edges read source features from the frozen encoder output,
    // so no information from later positions can travel backwards through
    // stacked layers.
    std::vector<std::int64_t> src_stacked(enc.src.size());
    for (std::size_t t = 0; t < enc.src.size(); ++t) {
        const int ps = enc.seq_pos[static_cast<std::size_t>(enc.src[t])];
        const int pd = enc.seq_pos[static_cast<std::size_t>(enc.dst[t])];
        src_stacked[t] = ps < pd ? enc.src[t] : enc.src[t] + n;
    }

    ConvLayer::GraphRefs refs;
    refs.n = n;
    refs.src = &enc.src;
    refs.dst = &enc.dst;
    refs.edge_s = &dec_edge_s;
    refs.edge_v = &enc.edge_v;
    refs.ar_s = &enc.node_s;
    refs.ar_v = &enc.node_v;
    refs.src_stacked = &src_stacked;

    Tensor s = enc.node_s, v = enc.node_v;
    for (const auto& layer : decoder_) {
        auto [ns, nv] = layer.forward(s, v, refs, cfg_.dropout, training, rng);
        s = ns;
        v = nv;
    }
    return linear(s, head_w_, head_b_);
}

Tensor Model::logits(const MultiGraph& mg, const std::vector<int>& bases, bool training,
                     RngStream* rng) const {
    return decode(encode(mg, training, rng), bases, training, rng);
}

// ---- checkpoint io -----------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'R', 'N', 'A', 'D', 'C', 'K', 'P', 'T'};
}

void save_checkpoint(const std::string& path, const Model& model, const std::string& meta_json) {
    Json header;
    header["format"] = "rnadesign-checkpoint-v1";
    header["config"] = Json::parse(model.config().to_json());
    header["init_seed"] = model.init_seed();
    header["meta"] = meta_json.empty() ? Json::object() : Json::parse(meta_json);
    Json manifest = Json::array();
    std::size_t total = 0;
    for (const auto& [name, t] : model.params()) {
        manifest.push_back({{"name", name}, {"shape", t->shape()}});
        total += t->data().size();
    }
    header["manifest"] = manifest;
    header["param_count"] = total;
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kMagic, 8);
    const std::uint64_t hlen = htext.size();
    unsigned char lenbuf[8];
    for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<unsigned char>((hlen >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(lenbuf), 8);
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (const auto& [name, t] : model.params()) {
        for (double v : t->data()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            unsigned char b[8];
            for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
            out.write(reinterpret_cast<const char*>(b), 8);
        }
    }
}

Model load_checkpoint(const std::string& path, std::string* meta_json) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::invalid_argument("not a checkpoint file: " + path);
    unsigned char lenbuf[8];
    in.read(reinterpret_cast<char*>(lenbuf), 8);
    std::uint64_t hlen = 0;
    for (int i = 0; i < 8; ++i) hlen |= static_cast<std::uint64_t>(lenbuf[i]) << (8 * i);
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::invalid_argument("truncated checkpoint header: " + path);
    Json header = Json::parse(htext);

    ModelConfig cfg = ModelConfig::from_json(header.at("config").dump());
    Model model(cfg, header.at("init_seed").get<std::uint64_t>());
    auto params = model.params();
    const Json& manifest = header.at("manifest");
    if (manifest.size() != params.size())
        throw std::invalid_argument("checkpoint manifest does not match model layout");
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (manifest[p].at("name").get<std::string>() != params[p].first)
            throw std::invalid_argument("checkpoint manifest mismatch at " + params[p].first);
        auto& data = params[p].second->data();
        for (auto& v : data) {
            unsigned char b[8];
            in.read(reinterpret_cast<char*>(b), 8);
            if (!in) throw std::invalid_argument("truncated checkpoint: " + path);
            std::uint64_t bits = 0;
            for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
            std::memcpy(&v, &bits, 8);
        }
    }
    if (meta_json) *meta_json = header.at("meta").dump();
    return model;
}

}  // namespace rnadesign

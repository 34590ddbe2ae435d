#include "rnadesign/gvp.hpp"

#include <cmath>
#include <stdexcept>

namespace rnadesign {

Tensor kaiming_uniform(Shape shape, std::int64_t fan_in, RngStream& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    return Tensor::rand_uniform(std::move(shape), rng, -bound, bound);
}

Gvp Gvp::init(const GvpConfig& cfg, RngStream& rng) {
    if (cfg.s_in <= 0 || cfg.v_in <= 0 || cfg.s_out <= 0 || cfg.v_out < 0)
        throw std::invalid_argument("gvp: bad channel configuration");
    Gvp g;
    g.cfg = cfg;
    g.v_hidden = std::max(cfg.v_in, std::max(cfg.v_out, 1));
    g.w_h = kaiming_uniform({cfg.v_in, g.v_hidden}, cfg.v_in, rng);
    g.w_m = kaiming_uniform({cfg.s_in + g.v_hidden, cfg.s_out}, cfg.s_in + g.v_hidden, rng);
    g.b_m = Tensor(Shape{cfg.s_out});
    if (cfg.v_out > 0) {
        g.w_mu = kaiming_uniform({g.v_hidden, cfg.v_out}, g.v_hidden, rng);
        if (cfg.vector_gate) {
            g.w_g = kaiming_uniform({cfg.s_out, cfg.v_out}, cfg.s_out, rng);
            g.b_g = Tensor(Shape{cfg.v_out});
        }
    }
    return g;
}

std::pair<Tensor, Tensor> Gvp::forward(const Tensor& s, const Tensor& v) const {
    if (s.dim(-1) != cfg.s_in || v.dim(-2) != cfg.v_in || v.dim(-1) != 3)
        throw std::invalid_argument("gvp: input shape mismatch");

    const Tensor v_t = transpose_last2(v);        // [..., 3, v_in]
    const Tensor vh_t = matmul(v_t, w_h);         // [..., 3, h]
    const Tensor vh = transpose_last2(vh_t);      // [..., h, 3]
    const Tensor norms = safe_norm(vh);           // [..., h]

    Tensor sm = linear(concat({s, norms}, -1), w_m, b_m);
    Tensor s_out = cfg.scalar_act ? relu(sm) : sm;

    Tensor v_out;
    if (cfg.v_out > 0) {
        const Tensor u = transpose_last2(matmul(vh_t, w_mu));  // [..., v_out, 3]
        if (cfg.vector_gate) {
            const Tensor gate = sigmoid(linear(s_out, w_g, b_g));
            v_out = mul(u, expand_last3(gate));
        } else {
            v_out = u;
        }
    }
    return {s_out, v_out};
}

void Gvp::collect_params(const std::string& prefix,
                         std::vector<std::pair<std::string, Tensor*>>& out) {
    out.emplace_back(prefix + ".w_h", &w_h);
    out.emplace_back(prefix + ".w_m", &w_m);
    out.emplace_back(prefix + ".b_m", &b_m);
    if (cfg.v_out > 0) {
        out.emplace_back(prefix + ".w_mu", &w_mu);
        if (cfg.vector_gate) {
            out.emplace_back(prefix + ".w_g", &w_g);
            out.emplace_back(prefix + ".b_g", &b_g);
        }
    }
}

}  // namespace rnadesign

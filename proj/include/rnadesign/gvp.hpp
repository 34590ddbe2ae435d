#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rnadesign/rng.hpp"
#include "rnadesign/tensor.hpp"

namespace rnadesign {

// Geometric vector perceptron: jointly transforms rotation-invariant scalar
// channels and rotation-equivariant vector channels. The vector path carries
// no additive bias, which is what keeps it equivariant.
struct GvpConfig {
    int s_in = 0;
    int v_in = 0;
    int s_out = 0;
    int v_out = 0;
    bool scalar_act = true;   // relu on the scalar output
    bool vector_gate = true;  // sigmoid gate on the vector output
};

struct Gvp {
    GvpConfig cfg;
    int v_hidden = 0;
    Tensor w_h;   // [v_in, v_hidden]   vector down/up projection
    Tensor w_m;   // [s_in + v_hidden, s_out]
    Tensor b_m;   // [s_out]
    Tensor w_mu;  // [v_hidden, v_out]
    Tensor w_g;   // [s_out, v_out]
    Tensor b_g;   // [v_out]

    static Gvp init(const GvpConfig& cfg, RngStream& rng);

    // s: [..., s_in], v: [..., v_in, 3] -> ([..., s_out], [..., v_out, 3]).
    // v' is an empty tensor when v_out == 0.
    std::pair<Tensor, Tensor> forward(const Tensor& s, const Tensor& v) const;

    void collect_params(const std::string& prefix,
                        std::vector<std::pair<std::string, Tensor*>>& out);
};

// Uniform Kaiming-style init: U(-b, b) with b = sqrt(6 / fan_in).
Tensor kaiming_uniform(Shape shape, std::int64_t fan_in, RngStream& rng);

}  // namespace rnadesign

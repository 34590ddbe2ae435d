#pragma once

#include <array>
#include <limits>
#include <string>
#include <vector>

#include "rnadesign/featurizer.hpp"
#include "rnadesign/model.hpp"
#include "rnadesign/rng.hpp"

namespace rnadesign {

struct DesignResult {
    std::string sequence;
    std::vector<double> per_position_logprob;  // untempered model log-probs
    double perplexity = 0.0;                   // exp(-mean of the above)
    double recovery = -1.0;                    // filled when native is known
    double mcc = std::numeric_limits<double>::quiet_NaN();  // optional
};

struct SampleOptions {
    double temperature = 0.1;
    // Per position: -1 designs the position, 0..3 pins that base.
    const std::vector<int>* fixed = nullptr;
    // Added to the logits before temperature scaling.
    const std::vector<std::array<double, 4>>* logit_bias = nullptr;
};

// Autoregressive 5'->3' sampling (one decoder pass per position); NAR models
// sample every position from a single pass. Temperatures below 1e-4 decode
// greedily. per_position_logprob comes from the untempered distribution.
DesignResult sample(const Model& model, const MultiGraph& mg, const SampleOptions& opt,
                    RngStream& rng);

// Fraction of positions where designed == native; `designed_mask` (when
// given) restricts counting to designed positions. An empty designed set
// counts as full recovery.
double recovery(const std::string& designed, const std::string& native,
                const std::vector<bool>* designed_mask = nullptr);

// Teacher-forced perplexity of a sequence under the model, natural log.
double perplexity(const Model& model, const MultiGraph& mg, const std::string& sequence);

// The same statistic straight from logit rows; exact anchors (uniform rows
// give exactly 4) are easiest to state at this level.
double perplexity_from_logits(const std::vector<std::array<double, 4>>& logits,
                              const std::vector<int>& targets);

// Deterministic evaluation-time state selection: first max_states by id.
// Training-time selection samples uniformly without replacement.
Ensemble select_states(const Ensemble& e, int max_states, bool training, RngStream* rng);

}  // namespace rnadesign

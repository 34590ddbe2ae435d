#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rnadesign/sampling.hpp"
#include "rnadesign/structure.hpp"

namespace rnadesign {

// Minimum unpaired loop length; partners must satisfy j - i >= kMinLoop + 1.
inline constexpr int kMinLoopLen = 3;

struct SecondaryStructure {
    int n = 0;
    std::vector<std::pair<int, int>> pairs;  // i < j, each index in at most one pair

    void validate() const;              // single-partner + min-loop invariants
    std::string dot_bracket() const;    // requires a non-crossing pairing
};

// Watson-Crick plus GU wobble.
bool bases_pair(char a, char b);

// Max-pairing dynamic program over nested structures. Deterministic
// traceback: an unpaired 5' base is preferred on ties, then the leftmost
// admissible partner.
SecondaryStructure nussinov_fold(const std::string& sequence);

// Ground-truth pairing heuristic from 3D: complementary nucleotides whose
// N beads sit within 8.9 +/- 1.0 A pair greedily, smallest deviation first,
// each nucleotide once. A supplied dot-bracket overrides this elsewhere.
SecondaryStructure pairs_from_structure(const RnaStructure& s);
inline constexpr double kPairDistance = 8.9;
inline constexpr double kPairWindow = 1.0;

SecondaryStructure parse_dot_bracket(const std::string& line);

// Matthews correlation over candidate position pairs (i < j, j - i >= 4);
// degenerate denominators give 0.
double mcc(const SecondaryStructure& pred, const SecondaryStructure& truth);

// Mean MCC of folded designs against each state's ground-truth pairing,
// sampled at the given temperature. truth_override substitutes the per-state
// heuristic when annotations are available.
double self_consistency(const Model& model, const Ensemble& e, const FeaturizerConfig& fcfg,
                        int n_samples, double temperature, RngStream& rng,
                        const std::vector<SecondaryStructure>* truth_override = nullptr);

// Per-ensemble test metrics: sampled recovery, native-sequence perplexity,
// and secondary-structure self-consistency.
struct EvalRow {
    std::string id;
    double recovery = 0.0;
    double perplexity = 0.0;
    double mcc = 0.0;
};

std::vector<EvalRow> evaluate_ensembles(const Model& model, const std::vector<Ensemble>& list,
                                        const FeaturizerConfig& fcfg, int n_samples,
                                        double temperature, int max_states, RngStream& rng);

}  // namespace rnadesign

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rnadesign/rng.hpp"
#include "rnadesign/structure.hpp"

namespace rnadesign {

// Generators for toy corpora used by the tests, the acceptance suite, and
// CLI demos. Hairpins are built on an idealized double helix whose paired
// N beads sit exactly 8.9 A apart, so the intended secondary structure is
// recoverable from geometry alone.

char wc_complement(char c);
std::string reverse_complement(const std::string& s);

struct HairpinSpec {
    std::size_t stem = 6;
    std::string loop_motif = "UUCG";
    std::string tail5 = "GGA";
    std::string tail3 = "ACC";
    // Rigid rotation of the hairpin's upper half about a mid-stem hinge;
    // deforms the global shape without disturbing any base-pair geometry.
    double hinge_angle = 0.0;
};

struct SyntheticHairpin {
    RnaStructure structure;
    std::vector<std::pair<int, int>> pairs;  // intended stem pairing, i < j
};

// stem_seq is the 5' stem half; the 3' half is its reverse complement.
SyntheticHairpin make_hairpin(const HairpinSpec& spec, const std::string& stem_seq,
                              const std::string& id);

// Uniformly random stem sequence of spec.stem bases.
SyntheticHairpin make_random_hairpin(const HairpinSpec& spec, RngStream& rng,
                                     const std::string& id);

// Smooth self-avoiding-ish random walk backbone; no designed pairing.
RnaStructure make_random_coil(std::size_t n, RngStream& rng, const std::string& id);

struct HairpinCorpusSpec {
    std::size_t count = 40;
    std::size_t min_stem = 4;
    std::size_t max_stem = 8;
    std::size_t n_states = 1;
    // Per-state hinge increment (state s gets hinge_angle = s * step).
    double hinge_step = 0.0;
};

// Ensembles "hp000".., each a random-stem hairpin; multi-state variants are
// hinge-opened copies of the same sequence.
std::vector<Ensemble> make_hairpin_corpus(const HairpinCorpusSpec& spec, RngStream& rng);

}  // namespace rnadesign

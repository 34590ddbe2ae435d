#pragma once

#include <array>
#include <string>
#include <vector>

#include "rnadesign/geom.hpp"

namespace rnadesign {

// Base alphabet indices used everywhere: A=0, C=1, G=2, U=3.
inline constexpr int kNumBases = 4;
int base_index(char c);        // throws std::invalid_argument on unknown letters
char base_char(int idx);
bool is_purine(char c);        // A or G

// Coarse-grained bead slots per nucleotide.
enum Bead : int { kBeadP = 0, kBeadC4 = 1, kBeadN = 2 };

// One chain's backbone: per-nucleotide P / C4' / N1-or-N9 coordinates (in
// Angstrom) plus the sequence. 'N' marks an unknown base (pure-backbone
// design inputs).
struct RnaStructure {
    std::string id;
    std::string sequence;
    std::vector<std::array<Vec3, 3>> beads;
    std::vector<std::array<bool, 3>> bead_present;
    std::vector<bool> mask;  // true iff all 3 beads present

    std::size_t length() const { return sequence.size(); }
    std::size_t unmasked_count() const;
    // C4' coordinates of unmasked nucleotides, in chain order.
    std::vector<Vec3> c4_coords() const;

    void validate() const;  // checks the field invariants, throws on violation
};

// A conformational ensemble: k >= 1 states sharing one sequence.
struct Ensemble {
    std::string id;
    std::string sequence;
    std::vector<RnaStructure> states;

    std::size_t length() const { return sequence.size(); }
    void validate() const;
};

// Groups structures by identical sequence; ensemble id is the
// lexicographically smallest member id, states sorted by id.
std::vector<Ensemble> group_into_ensembles(const std::vector<RnaStructure>& structures);

// FASTA with 60-column wrapping.
std::string write_fasta(const std::vector<std::pair<std::string, std::string>>& records);
std::vector<std::pair<std::string, std::string>> read_fasta(const std::string& text);

}  // namespace rnadesign

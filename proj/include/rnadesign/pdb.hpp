#pragma once

#include <string>
#include <vector>

#include "rnadesign/structure.hpp"

namespace rnadesign {

// Parses fixed-column ATOM/HETATM records (PDB 3.3 layout), extracting the
// P / C4' / N1-or-N9 beads of RNA residues. Returns one structure per
// (model, chain); non-RNA residues and alternate locations other than ' '/'A'
// are ignored. Residues missing any bead are masked. Throws when the file
// contains no RNA residues at all or a coordinate field is malformed.
std::vector<RnaStructure> parse_pdb(const std::string& text, const std::string& name_hint = "pdb");

std::vector<RnaStructure> parse_pdb_file(const std::string& path);

// Emits the coarse-grained beads back out as fixed-column ATOM records.
// parse(emit(s)) reproduces coordinates at PDB precision (1e-3 A).
std::string emit_pdb(const RnaStructure& s);

void write_pdb_file(const std::string& path, const RnaStructure& s);

}  // namespace rnadesign

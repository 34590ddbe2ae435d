#include "rnadesign/structure.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace rnadesign {

int base_index(char c) {
    switch (c) {
        case 'A': case 'a': return 0;
        case 'C': case 'c': return 1;
        case 'G': case 'g': return 2;
        case 'U': case 'u': return 3;
        default:
            throw std::invalid_argument(std::string("unknown base letter '") + c + "'");
    }
}

char base_char(int idx) {
    static const char table[] = {'A', 'C', 'G', 'U'};
    if (idx < 0 || idx >= kNumBases) throw std::invalid_argument("base index out of range");
    return table[idx];
}

bool is_purine(char c) { return c == 'A' || c == 'a' || c == 'G' || c == 'g'; }

std::size_t RnaStructure::unmasked_count() const {
    std::size_t n = 0;
    for (bool m : mask)
        if (m) ++n;
    return n;
}

std::vector<Vec3> RnaStructure::c4_coords() const {
    std::vector<Vec3> out;
    out.reserve(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) out.push_back(beads[i][kBeadC4]);
    return out;
}

void RnaStructure::validate() const {
    if (sequence.size() != beads.size() || beads.size() != mask.size() ||
        bead_present.size() != mask.size())
        throw std::invalid_argument("structure " + id + ": field lengths disagree");
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) {
            for (int b = 0; b < 3; ++b)
                for (int c = 0; c < 3; ++c)
                    if (!std::isfinite(beads[i][b][c]))
                        throw std::invalid_argument("structure " + id +
                                                    ": non-finite unmasked coordinate");
        }
        if (sequence[i] != 'N') base_index(sequence[i]);
    }
}

void Ensemble::validate() const {
    if (states.empty()) throw std::invalid_argument("ensemble " + id + ": no states");
    for (const auto& s : states) {
        s.validate();
        if (s.sequence != sequence)
            throw std::invalid_argument("ensemble " + id + ": state " + s.id +
                                        " has a different sequence");
    }
}

std::vector<Ensemble> group_into_ensembles(const std::vector<RnaStructure>& structures) {
    std::map<std::string, std::vector<RnaStructure>> by_seq;
    for (const auto& s : structures) by_seq[s.sequence].push_back(s);
    std::vector<Ensemble> out;
    out.reserve(by_seq.size());
    for (auto& [seq, states] : by_seq) {
        std::sort(states.begin(), states.end(),
                  [](const RnaStructure& a, const RnaStructure& b) { return a.id < b.id; });
        Ensemble e;
        e.sequence = seq;
        e.id = states.front().id;
        e.states = std::move(states);
        out.push_back(std::move(e));
    }
    std::sort(out.begin(), out.end(), [](const Ensemble& a, const Ensemble& b) { return a.id < b.id; });
    return out;
}

std::string write_fasta(const std::vector<std::pair<std::string, std::string>>& records) {
    std::ostringstream os;
    for (const auto& [id, seq] : records) {
        os << ">" << id << "\n";
        for (std::size_t i = 0; i < seq.size(); i += 60) os << seq.substr(i, 60) << "\n";
    }
    return os.str();
}

std::vector<std::pair<std::string, std::string>> read_fasta(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '>') {
            out.emplace_back(line.substr(1), "");
        } else {
            if (out.empty()) throw std::invalid_argument("FASTA: sequence before header");
            out.back().second += line;
        }
    }
    return out;
}

}  // namespace rnadesign

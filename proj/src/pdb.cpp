#include "rnadesign/pdb.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace rnadesign {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::string field(const std::string& line, std::size_t col1, std::size_t col2) {
    // 1-based inclusive column range; lines may be shorter than 80 chars.
    if (line.size() < col1) return "";
    return line.substr(col1 - 1, std::min(col2, line.size()) - col1 + 1);
}

double parse_coord(const std::string& line, std::size_t col1, std::size_t col2) {
    const std::string raw = trim(field(line, col1, col2));
    if (raw.empty()) throw std::invalid_argument("PDB: missing coordinate field");
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(raw, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("PDB: malformed coordinate field '" + raw + "'");
    }
    if (pos != raw.size())
        throw std::invalid_argument("PDB: malformed coordinate field '" + raw + "'");
    return v;
}

char residue_letter(const std::string& res_name) {
    const std::string r = trim(res_name);
    if (r == "A" || r == "C" || r == "G" || r == "U") return r[0];
    if (r == "N" || r == "UNK") return 'N';  // backbone-only design inputs
    return 0;  // not an RNA residue we handle
}

struct ResidueAccum {
    char base = 0;
    bool has[4] = {false, false, false, false};  // P, C4', N1, N9
    Vec3 xyz[4];
};

}  // namespace

std::vector<RnaStructure> parse_pdb(const std::string& text, const std::string& name_hint) {
    // key: (model, chain) -> residues in file order
    struct ChainAccum {
        std::vector<std::string> order;
        std::map<std::string, ResidueAccum> residues;
    };
    std::map<std::pair<int, char>, ChainAccum> chains;
    std::vector<std::pair<int, char>> chain_order;

    int model = 0;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string rec = field(line, 1, 6);
        if (rec.rfind("MODEL", 0) == 0) {
            const std::string m = trim(field(line, 11, 14));
            model = m.empty() ? model + 1 : std::stoi(m);
            continue;
        }
        if (rec != "ATOM  " && rec != "HETATM") continue;

        const char alt = line.size() >= 17 ? line[16] : ' ';
        if (alt != ' ' && alt != 'A') continue;
        const char base = residue_letter(field(line, 18, 20));
        if (base == 0) continue;

        const std::string atom = trim(field(line, 13, 16));
        int slot = -1;
        if (atom == "P") slot = 0;
        else if (atom == "C4'" || atom == "C4*") slot = 1;
        else if (atom == "N1") slot = 2;
        else if (atom == "N9") slot = 3;
        if (slot < 0) continue;

        const char chain_id = line.size() >= 22 ? line[21] : ' ';
        const std::string res_key = field(line, 23, 27);  // resSeq + iCode
        const Vec3 xyz = {parse_coord(line, 31, 38), parse_coord(line, 39, 46),
                          parse_coord(line, 47, 54)};

        auto key = std::make_pair(model, chain_id);
        auto it = chains.find(key);
        if (it == chains.end()) {
            it = chains.emplace(key, ChainAccum{}).first;
            chain_order.push_back(key);
        }
        auto& chain = it->second;
        auto rit = chain.residues.find(res_key);
        if (rit == chain.residues.end()) {
            rit = chain.residues.emplace(res_key, ResidueAccum{}).first;
            chain.order.push_back(res_key);
        }
        rit->second.base = base;
        if (!rit->second.has[slot]) {
            rit->second.has[slot] = true;
            rit->second.xyz[slot] = xyz;
        }
    }

    std::vector<RnaStructure> out;
    for (const auto& key : chain_order) {
        const auto& chain = chains.at(key);
        RnaStructure s;
        s.id = name_hint;
        if (key.second != ' ' && key.second != 0) s.id += std::string("_") + key.second;
        if (key.first > 0) s.id += "_m" + std::to_string(key.first);
        for (const auto& res_key : chain.order) {
            const ResidueAccum& r = chain.residues.at(res_key);
            s.sequence.push_back(r.base);
            std::array<Vec3, 3> beads = {Vec3{0, 0, 0}, Vec3{0, 0, 0}, Vec3{0, 0, 0}};
            std::array<bool, 3> present = {false, false, false};
            if (r.has[0]) { beads[kBeadP] = r.xyz[0]; present[kBeadP] = true; }
            if (r.has[1]) { beads[kBeadC4] = r.xyz[1]; present[kBeadC4] = true; }
            // N bead by residue identity; unknown bases take whichever exists.
            int nslot = -1;
            if (r.base == 'N') nslot = r.has[3] ? 3 : (r.has[2] ? 2 : -1);
            else if (is_purine(r.base)) nslot = r.has[3] ? 3 : -1;
            else nslot = r.has[2] ? 2 : -1;
            if (nslot >= 0) { beads[kBeadN] = r.xyz[nslot]; present[kBeadN] = true; }
            s.beads.push_back(beads);
            s.bead_present.push_back(present);
            s.mask.push_back(present[0] && present[1] && present[2]);
        }
        if (!s.sequence.empty()) out.push_back(std::move(s));
    }
    if (out.empty()) throw std::invalid_argument("PDB: no RNA residues found");
    return out;
}

std::vector<RnaStructure> parse_pdb_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open PDB file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string stem = path;
    if (auto slash = stem.find_last_of("/\\"); slash != std::string::npos)
        stem = stem.substr(slash + 1);
    if (auto dot = stem.find_last_of('.'); dot != std::string::npos) stem = stem.substr(0, dot);
    return parse_pdb(ss.str(), stem);
}

std::string emit_pdb(const RnaStructure& s) {
    std::ostringstream os;
    int serial = 1;
    char buf[96];
    for (std::size_t i = 0; i < s.length(); ++i) {
        const char base = s.sequence[i];
        const char* atom_names[3] = {" P  ", " C4'", nullptr};
        const char* nname = (base == 'N' || is_purine(base)) ? " N9 " : " N1 ";
        for (int b = 0; b < 3; ++b) {
            if (!s.bead_present[i][b]) continue;
            const char* aname = b == kBeadN ? nname : atom_names[b];
            const char* elem = b == kBeadP ? " P" : (b == kBeadC4 ? " C" : " N");
            std::snprintf(buf, sizeof(buf),
                          "ATOM  %5d %s %3c A%4zu    %8.3f%8.3f%8.3f%6.2f%6.2f          %s\n",
                          serial++, aname, base, i + 1, s.beads[i][b][0], s.beads[i][b][1],
                          s.beads[i][b][2], 1.0, 0.0, elem);
            os << buf;
        }
    }
    os << "END\n";
    return os.str();
}

void write_pdb_file(const std::string& path, const RnaStructure& s) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write PDB file: " + path);
    out << emit_pdb(s);
}

}  // namespace rnadesign

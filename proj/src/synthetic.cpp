#include "rnadesign/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "rnadesign/geom.hpp"

namespace rnadesign {

char wc_complement(char c) {
    switch (c) {
        case 'A': return 'U';
        case 'U': return 'A';
        case 'C': return 'G';
        case 'G': return 'C';
        default: throw std::invalid_argument("wc_complement: unknown base");
    }
}

std::string reverse_complement(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (auto it = s.rbegin(); it != s.rend(); ++it) out.push_back(wc_complement(*it));
    return out;
}

namespace {

constexpr double kTwist = 0.57;   // rad per base pair
constexpr double kRise = 2.81;    // A per base pair
constexpr double kNRadius = 4.45; // paired N beads are 2 * 4.45 = 8.9 A apart
constexpr double kC4Radius = 7.6;
constexpr double kPRadius = 9.3;

struct Residue {
    Vec3 p, c4, n;
};

// One stem rung; side 0 is the 5' strand, side 1 its partner.
Residue stem_residue(std::size_t t, int side) {
    const double phi = static_cast<double>(t) * kTwist;
    const double sigma = side == 0 ? 0.0 : M_PI;
    const double mirror = side == 0 ? -1.0 : 1.0;
    const double z = static_cast<double>(t) * kRise;
    Residue r;
    r.n = {kNRadius * std::cos(phi + sigma), kNRadius * std::sin(phi + sigma), z};
    r.c4 = {kC4Radius * std::cos(phi + sigma + mirror * 0.30),
            kC4Radius * std::sin(phi + sigma + mirror * 0.30), z};
    r.p = {kPRadius * std::cos(phi + sigma + mirror * 0.65),
           kPRadius * std::sin(phi + sigma + mirror * 0.65), z - 1.3};
    return r;
}

// Straight single-stranded tail growing radially away from the helix.
Residue tail_residue(const Residue& anchor, const Vec3& dir, std::size_t k) {
    const Vec3 step = 5.4 * dir;
    Residue r;
    const Vec3 base = anchor.c4 + (static_cast<double>(k) * step);
    r.c4 = base + step;
    r.p = base + (0.35 * step);
    r.n = r.c4 + Vec3{0, 0, -3.2};
    return r;
}

void push_residue(RnaStructure& s, char base, const Residue& r) {
    s.sequence.push_back(base);
    s.beads.push_back({r.p, r.c4, r.n});
    s.bead_present.push_back({true, true, true});
    s.mask.push_back(true);
}

}  // namespace

SyntheticHairpin make_hairpin(const HairpinSpec& spec, const std::string& stem_seq,
                              const std::string& id) {
    if (stem_seq.size() != spec.stem)
        throw std::invalid_argument("make_hairpin: stem sequence length mismatch");
    if (spec.stem < 2) throw std::invalid_argument("make_hairpin: stem must be >= 2");
    if (spec.loop_motif.size() < 3)
        throw std::invalid_argument("make_hairpin: loop must be >= 3 for a valid hairpin");

    const std::size_t t5 = spec.tail5.size(), t3 = spec.tail3.size();
    const std::size_t stem = spec.stem, loop = spec.loop_motif.size();

    RnaStructure s;
    s.id = id;

    // 5' tail, pointing away from the strand-0 base of the helix.
    const Residue bottom0 = stem_residue(0, 0);
    const Vec3 dir5 = unit_or_zero(Vec3{std::cos(-0.9), std::sin(-0.9), -0.45});
    for (std::size_t k = 0; k < t5; ++k)
        push_residue(s, spec.tail5[k], tail_residue(bottom0, dir5, t5 - 1 - k));

    // 5' stem strand, ascending.
    for (std::size_t t = 0; t < stem; ++t) push_residue(s, stem_seq[t], stem_residue(t, 0));

    // Loop: arc over the top from strand 0 to strand 1.
    const Residue top0 = stem_residue(stem - 1, 0), top1 = stem_residue(stem - 1, 1);
    const Vec3 mid = 0.5 * (top0.c4 + top1.c4);
    const Vec3 radial = top0.c4 - mid;
    const double arc_r = norm(radial);
    const Vec3 er = unit_or_zero(radial);
    for (std::size_t l = 0; l < loop; ++l) {
        const double u = static_cast<double>(l + 1) / static_cast<double>(loop + 1);
        const Vec3 pos = mid + (arc_r * std::cos(M_PI * u)) * er +
                         Vec3{0, 0, arc_r * std::sin(M_PI * u) + 2.2};
        const Vec3 out = unit_or_zero(pos - (mid + Vec3{0, 0, 2.2}));
        Residue r;
        r.c4 = pos;
        r.p = pos - (2.8 * out) + Vec3{0, 0, 0.9};
        r.n = pos + (3.1 * out);
        push_residue(s, spec.loop_motif[l], r);
    }

    // 3' stem strand, descending.
    const std::string stem3 = reverse_complement(stem_seq);
    for (std::size_t t = 0; t < stem; ++t)
        push_residue(s, stem3[t], stem_residue(stem - 1 - t, 1));

    // 3' tail off the strand-1 base.
    const Residue bottom1 = stem_residue(0, 1);
    const Vec3 dir3 = unit_or_zero(Vec3{std::cos(M_PI + 0.9), std::sin(M_PI + 0.9), -0.45});
    for (std::size_t k = 0; k < t3; ++k)
        push_residue(s, spec.tail3[k], tail_residue(bottom1, dir3, k));

    // Hinge: rigidly rotate everything above the mid-stem rung. Each base
    // pair moves as a unit, so pair geometry is untouched.
    if (spec.hinge_angle != 0.0) {
        const std::size_t hinge_rung = stem / 2;
        const double z_min = static_cast<double>(hinge_rung) * kRise - 0.1;
        const Vec3 pivot = {0, 0, static_cast<double>(hinge_rung) * kRise};
        const Mat3 rot = axis_angle_rotation({1, 0, 0}, spec.hinge_angle);
        for (std::size_t i = 0; i < s.length(); ++i) {
            // A residue moves iff its rung is above the hinge; use C4' height.
            if (s.beads[i][kBeadC4][2] > z_min) {
                for (int b = 0; b < 3; ++b)
                    s.beads[i][b] = pivot + mat_apply(rot, s.beads[i][b] - pivot);
            }
        }
    }

    SyntheticHairpin out;
    out.structure = std::move(s);
    for (std::size_t t = 0; t < stem; ++t) {
        const int i = static_cast<int>(t5 + t);
        const int j = static_cast<int>(t5 + stem + loop + (stem - 1 - t));
        out.pairs.emplace_back(i, j);
    }
    return out;
}

SyntheticHairpin make_random_hairpin(const HairpinSpec& spec, RngStream& rng,
                                     const std::string& id) {
    std::string stem_seq;
    for (std::size_t i = 0; i < spec.stem; ++i)
        stem_seq.push_back(base_char(static_cast<int>(rng.uniform_int(4))));
    return make_hairpin(spec, stem_seq, id);
}

RnaStructure make_random_coil(std::size_t n, RngStream& rng, const std::string& id) {
    RnaStructure s;
    s.id = id;
    Vec3 pos = {0, 0, 0};
    Vec3 dir = {1, 0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        // Smoothly wandering direction.
        const Mat3 kick = axis_angle_rotation({rng.normal(), rng.normal(), rng.normal()},
                                              rng.uniform(0.25, 0.7));
        dir = unit_or_zero(mat_apply(kick, dir));
        const Vec3 next = pos + (5.9 * dir);
        const Vec3 side = unit_or_zero(cross(dir, {0, 0, 1}));
        Residue r;
        r.p = pos + (1.4 * dir);
        r.c4 = pos + (3.1 * dir) + (1.1 * side);
        r.n = pos + (3.1 * dir) + (3.6 * side);
        push_residue(s, base_char(static_cast<int>(rng.uniform_int(4))), r);
        pos = next;
    }
    return s;
}

std::vector<Ensemble> make_hairpin_corpus(const HairpinCorpusSpec& spec, RngStream& rng) {
    std::vector<Ensemble> out;
    char idbuf[16];
    for (std::size_t i = 0; i < spec.count; ++i) {
        HairpinSpec hs;
        hs.stem = spec.min_stem + rng.uniform_int(spec.max_stem - spec.min_stem + 1);
        std::string stem_seq;
        for (std::size_t k = 0; k < hs.stem; ++k)
            stem_seq.push_back(base_char(static_cast<int>(rng.uniform_int(4))));
        std::snprintf(idbuf, sizeof(idbuf), "hp%03zu", i);
        Ensemble e;
        e.id = idbuf;
        for (std::size_t st = 0; st < spec.n_states; ++st) {
            hs.hinge_angle = spec.hinge_step * static_cast<double>(st);
            auto hp = make_hairpin(hs, stem_seq, std::string(idbuf) + "_s" + std::to_string(st));
            e.sequence = hp.structure.sequence;
            e.states.push_back(std::move(hp.structure));
        }
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace rnadesign

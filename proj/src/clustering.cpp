#include "rnadesign/clustering.hpp"

#include <algorithm>
#include <stdexcept>

#include "rnadesign/align.hpp"

namespace rnadesign {

double sequence_identity(const std::string& a, const std::string& b) {
    const std::string& s = a.size() <= b.size() ? a : b;
    const std::string& l = a.size() <= b.size() ? b : a;
    if (s.empty()) return 0.0;
    std::size_t best = 0;
    for (std::size_t off = 0; off + s.size() <= l.size(); ++off) {
        std::size_t matches = 0;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s[i] == l[off + i]) ++matches;
        best = std::max(best, matches);
    }
    return static_cast<double>(best) / static_cast<double>(s.size());
}

ClusterResult cluster_structures(const std::vector<Ensemble>& ensembles, double tm_threshold,
                                 double seq_id_threshold) {
    std::vector<const Ensemble*> order;
    order.reserve(ensembles.size());
    for (const auto& e : ensembles) {
        e.validate();
        order.push_back(&e);
    }
    std::sort(order.begin(), order.end(), [](const Ensemble* a, const Ensemble* b) {
        if (a->length() != b->length()) return a->length() > b->length();
        return a->id < b->id;
    });

    ClusterResult res;
    std::vector<const Ensemble*> leader_ptrs;
    std::vector<Coords> leader_c4;
    for (const Ensemble* e : order) {
        const Coords c4 = e->states.front().c4_coords();
        int found = -1;
        for (std::size_t c = 0; c < leader_ptrs.size(); ++c) {
            const Ensemble* lead = leader_ptrs[c];
            if (c4.size() == leader_c4[c].size() && c4.size() >= 3) {
                if (tm_score(c4, leader_c4[c]) > tm_threshold) {
                    found = static_cast<int>(c);
                    break;
                }
            } else if (sequence_identity(e->sequence, lead->sequence) >= seq_id_threshold) {
                found = static_cast<int>(c);
                break;
            }
        }
        if (found < 0) {
            found = res.n_clusters++;
            leader_ptrs.push_back(e);
            leader_c4.push_back(c4);
            res.leaders.push_back(e->id);
        }
        res.assignment[e->id] = found;
    }
    return res;
}

}  // namespace rnadesign

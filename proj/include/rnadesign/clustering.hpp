#pragma once

#include <map>
#include <string>
#include <vector>

#include "rnadesign/structure.hpp"

namespace rnadesign {

struct ClusterResult {
    std::map<std::string, int> assignment;  // ensemble id -> cluster index
    int n_clusters = 0;
    std::vector<std::string> leaders;  // ensemble id per cluster
};

// Identity over the shorter sequence after the best ungapped offset.
double sequence_identity(const std::string& a, const std::string& b);

// Greedy leader clustering over ensembles, by descending length (ties by id):
// join the first existing cluster whose leader matches by TM-score > threshold
// (equal lengths, C4' coordinates of the first state) or by sequence identity
// >= seq_id_threshold (unequal lengths); otherwise found a new cluster.
// Deterministic for a given corpus.
ClusterResult cluster_structures(const std::vector<Ensemble>& ensembles,
                                 double tm_threshold = 0.45, double seq_id_threshold = 0.8);

}  // namespace rnadesign

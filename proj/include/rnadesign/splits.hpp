#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rnadesign/clustering.hpp"
#include "rnadesign/structure.hpp"

namespace rnadesign {

struct SplitManifest {
    std::string split_name;  // "single_state" or "multi_state"
    std::uint64_t seed = 0;
    std::vector<std::string> train, val, test;
    std::map<std::string, int> cluster_assignments;
    std::vector<std::string> notes;

    // Disjointness, cluster integrity, and the <=5-unique-sequence rule for
    // val/test clusters. Throws std::invalid_argument on violation.
    void validate(const std::vector<Ensemble>& corpus) const;
};

inline constexpr std::size_t kMinRnaLength = 10;    // strands shorter than this are dropped
inline constexpr std::size_t kMaxDesignLength = 1000;  // longer RNAs go straight to train

// Clusters holding any of test_ids all go to test; remaining clusters are
// split randomly between train and val (val holds whole clusters, capped at
// val_cap ensembles, only clusters with <= 5 unique sequences are eligible).
SplitManifest make_single_state_split(const std::vector<Ensemble>& ensembles,
                                      const ClusterResult& clusters,
                                      const std::vector<std::string>& test_ids,
                                      std::uint64_t seed, std::size_t val_cap = 100);

// Clusters ordered by descending median (over member sequences) of the mean
// pairwise C4' RMSD among each sequence's states; the most flexible clusters
// fill test, then val, remainder trains. Ties sort by smallest ensemble id.
SplitManifest make_multi_state_split(const std::vector<Ensemble>& ensembles,
                                     const ClusterResult& clusters, std::uint64_t seed,
                                     std::size_t test_cap = 100, std::size_t val_cap = 100);

// Mean pairwise C4' kabsch_rmsd among an ensemble's states (0 for k == 1).
double ensemble_flexibility_rmsd(const Ensemble& e);

std::string manifest_to_json(const SplitManifest& m);
SplitManifest manifest_from_json(const std::string& text);
void write_manifest_file(const std::string& path, const SplitManifest& m);
SplitManifest read_manifest_file(const std::string& path);

}  // namespace rnadesign

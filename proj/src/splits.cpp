#include "rnadesign/splits.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "rnadesign/align.hpp"
#include "rnadesign/rng.hpp"

namespace rnadesign {

namespace {

using Json = nlohmann::json;

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct ClusterInfo {
    int index;
    std::vector<const Ensemble*> members;  // eligible members, sorted by id
    std::size_t unique_sequences() const {
        std::set<std::string> s;
        for (auto* e : members) s.insert(e->sequence);
        return s.size();
    }
    std::string min_id() const { return members.front()->id; }
};

// Partitions the corpus into: dropped (too short), forced-train (too long or
// unclustered), and per-cluster eligible members.
struct Partition {
    std::vector<std::string> forced_train;
    std::map<int, ClusterInfo> clusters;
};

Partition partition_corpus(const std::vector<Ensemble>& ensembles, const ClusterResult& cr) {
    Partition p;
    for (const auto& e : ensembles) {
        if (e.length() < kMinRnaLength) continue;  // excluded entirely
        auto it = cr.assignment.find(e.id);
        if (e.length() > kMaxDesignLength || it == cr.assignment.end()) {
            p.forced_train.push_back(e.id);
            continue;
        }
        auto& info = p.clusters[it->second];
        info.index = it->second;
        info.members.push_back(&e);
    }
    for (auto& [idx, info] : p.clusters)
        std::sort(info.members.begin(), info.members.end(),
                  [](const Ensemble* a, const Ensemble* b) { return a->id < b->id; });
    return p;
}

void append_members(std::vector<std::string>& out, const ClusterInfo& info) {
    for (auto* e : info.members) out.push_back(e->id);
}

}  // namespace

double ensemble_flexibility_rmsd(const Ensemble& e) {
    if (e.states.size() < 2) return 0.0;
    std::vector<Coords> c4;
    for (const auto& s : e.states) c4.push_back(s.c4_coords());
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < c4.size(); ++i)
        for (std::size_t j = i + 1; j < c4.size(); ++j) {
            if (c4[i].size() == c4[j].size() && c4[i].size() >= 3) {
                sum += kabsch_rmsd(c4[i], c4[j]);
                ++count;
            }
        }
    return count ? sum / static_cast<double>(count) : 0.0;
}

SplitManifest make_single_state_split(const std::vector<Ensemble>& ensembles,
                                      const ClusterResult& clusters,
                                      const std::vector<std::string>& test_ids,
                                      std::uint64_t seed, std::size_t val_cap) {
    for (const auto& id : test_ids) {
        if (!clusters.assignment.count(id))
            throw std::invalid_argument("split: test id not in corpus/clustering: " + id);
    }
    SplitManifest m;
    m.split_name = "single_state";
    m.seed = seed;
    m.cluster_assignments = clusters.assignment;

    Partition p = partition_corpus(ensembles, clusters);
    m.train = p.forced_train;

    std::set<int> test_clusters;
    for (const auto& id : test_ids) test_clusters.insert(clusters.assignment.at(id));

    std::vector<const ClusterInfo*> rest;
    for (const auto& [idx, info] : p.clusters) {
        if (test_clusters.count(idx)) {
            append_members(m.test, info);
            if (info.unique_sequences() > 5)
                m.notes.push_back("test cluster " + std::to_string(idx) +
                                  " exceeds 5 unique sequences");
        } else {
            rest.push_back(&info);
        }
    }
    if (m.test.empty()) throw std::invalid_argument("split: test set empty after filtering");

    // Random assignment of the remaining clusters; val takes whole clusters
    // up to the cap and only ones with <= 5 unique sequences.
    RngStream rng = RngStream(seed).child("single_state_split");
    rng.shuffle(rest);
    std::size_t val_count = 0;
    for (const ClusterInfo* info : rest) {
        const bool fits = val_count + info->members.size() <= val_cap;
        if (fits && info->unique_sequences() <= 5) {
            append_members(m.val, *info);
            val_count += info->members.size();
        } else {
            append_members(m.train, *info);
        }
    }
    std::sort(m.train.begin(), m.train.end());
    std::sort(m.val.begin(), m.val.end());
    std::sort(m.test.begin(), m.test.end());
    m.validate(ensembles);
    return m;
}

SplitManifest make_multi_state_split(const std::vector<Ensemble>& ensembles,
                                     const ClusterResult& clusters, std::uint64_t seed,
                                     std::size_t test_cap, std::size_t val_cap) {
    SplitManifest m;
    m.split_name = "multi_state";
    m.seed = seed;
    m.cluster_assignments = clusters.assignment;
    m.notes.push_back("clusters ordered by median intra-sequence RMSD; ties by ensemble id");

    Partition p = partition_corpus(ensembles, clusters);
    m.train = p.forced_train;

    struct Ranked {
        const ClusterInfo* info;
        double median_rmsd;
    };
    std::vector<Ranked> ranked;
    for (const auto& [idx, info] : p.clusters) {
        std::vector<double> per_sequence;
        for (auto* e : info.members) per_sequence.push_back(ensemble_flexibility_rmsd(*e));
        ranked.push_back({&info, median(per_sequence)});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.median_rmsd != b.median_rmsd) return a.median_rmsd > b.median_rmsd;
        return a.info->min_id() < b.info->min_id();
    });

    std::size_t test_count = 0, val_count = 0;
    for (const auto& r : ranked) {
        const std::size_t sz = r.info->members.size();
        if (r.info->unique_sequences() <= 5 && test_count + sz <= test_cap) {
            append_members(m.test, *r.info);
            test_count += sz;
        } else if (r.info->unique_sequences() <= 5 && val_count + sz <= val_cap) {
            append_members(m.val, *r.info);
            val_count += sz;
        } else {
            append_members(m.train, *r.info);
        }
    }
    std::sort(m.train.begin(), m.train.end());
    std::sort(m.val.begin(), m.val.end());
    std::sort(m.test.begin(), m.test.end());
    m.validate(ensembles);
    return m;
}

void SplitManifest::validate(const std::vector<Ensemble>& corpus) const {
    std::map<std::string, const Ensemble*> by_id;
    for (const auto& e : corpus) by_id[e.id] = &e;

    std::set<std::string> seen;
    auto check_list = [&](const std::vector<std::string>& list, const char* name) {
        for (const auto& id : list) {
            if (!seen.insert(id).second)
                throw std::invalid_argument("manifest: id in two splits: " + id);
            if (!by_id.count(id))
                throw std::invalid_argument(std::string("manifest: unknown id in ") + name +
                                            ": " + id);
        }
    };
    check_list(train, "train");
    check_list(val, "val");
    check_list(test, "test");

    // Every eligible ensemble is covered.
    for (const auto& e : corpus) {
        if (e.length() < kMinRnaLength) {
            if (seen.count(e.id))
                throw std::invalid_argument("manifest: too-short ensemble present: " + e.id);
            continue;
        }
        if (!seen.count(e.id))
            throw std::invalid_argument("manifest: eligible ensemble missing: " + e.id);
    }

    // No cluster straddles two splits; val/test clusters stay small.
    std::map<int, std::string> cluster_split;
    std::map<int, std::set<std::string>> cluster_seqs;
    auto scan = [&](const std::vector<std::string>& list, const std::string& name) {
        for (const auto& id : list) {
            auto it = cluster_assignments.find(id);
            if (it == cluster_assignments.end()) continue;
            auto [cit, fresh] = cluster_split.emplace(it->second, name);
            if (!fresh && cit->second != name)
                throw std::invalid_argument("manifest: cluster " + std::to_string(it->second) +
                                            " straddles " + cit->second + " and " + name);
            if (name != "train") cluster_seqs[it->second].insert(by_id.at(id)->sequence);
        }
    };
    // Oversized ensembles are forced into train regardless of their cluster,
    // so the straddle check applies to design-scale ensembles only.
    std::vector<std::string> design_train;
    for (const auto& id : train)
        if (by_id.at(id)->length() <= kMaxDesignLength) design_train.push_back(id);
    scan(design_train, "train");
    scan(val, "val");
    scan(test, "test");
    for (const auto& [idx, seqs] : cluster_seqs) {
        if (seqs.size() <= 5) continue;
        // Test clusters forced in by requested test ids may exceed the limit,
        // but only when the split recorded that explicitly.
        const std::string note =
            "test cluster " + std::to_string(idx) + " exceeds 5 unique sequences";
        if (std::find(notes.begin(), notes.end(), note) == notes.end())
            throw std::invalid_argument("manifest: val/test cluster " + std::to_string(idx) +
                                        " has more than 5 unique sequences");
    }
}

std::string manifest_to_json(const SplitManifest& m) {
    Json j;
    j["split_name"] = m.split_name;
    j["seed"] = m.seed;
    j["train"] = m.train;
    j["val"] = m.val;
    j["test"] = m.test;
    j["cluster_assignments"] = m.cluster_assignments;
    j["notes"] = m.notes;
    return j.dump(2) + "\n";
}

SplitManifest manifest_from_json(const std::string& text) {
    Json j = Json::parse(text);
    SplitManifest m;
    m.split_name = j.at("split_name").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.train = j.at("train").get<std::vector<std::string>>();
    m.val = j.at("val").get<std::vector<std::string>>();
    m.test = j.at("test").get<std::vector<std::string>>();
    m.cluster_assignments = j.at("cluster_assignments").get<std::map<std::string, int>>();
    if (j.contains("notes")) m.notes = j.at("notes").get<std::vector<std::string>>();
    return m;
}

void write_manifest_file(const std::string& path, const SplitManifest& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << manifest_to_json(m);
}

SplitManifest read_manifest_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open manifest: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return manifest_from_json(ss.str());
}

}  // namespace rnadesign

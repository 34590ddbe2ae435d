#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "rnadesign/model.hpp"
#include "rnadesign/rng.hpp"

namespace rnadesign {

struct FitnessRecord {
    std::string sequence;
    double fitness = 0.0;
    int mutation_order = 0;  // Hamming distance to the wild type
};

struct BudgetReport {
    std::string strategy;  // random_all | random_single | random_single_double |
                           // model_perplexity
    std::size_t budget = 0;
    double median_max_improvement = 0.0;
    double q25 = std::numeric_limits<double>::quiet_NaN();  // stochastic strategies only
    double q75 = std::numeric_limits<double>::quiet_NaN();
    bool stochastic = true;
    bool clamped = false;  // budget exceeded the pool and was clamped
};

// CSV with header "sequence,fitness"; mutation orders computed against the
// wild-type sequence (all records must share its length).
std::vector<FitnessRecord> parse_landscape_csv(const std::string& text,
                                               const std::string& wild_type);
std::vector<FitnessRecord> read_landscape_file(const std::string& path,
                                               const std::string& wild_type);

int hamming_distance(const std::string& a, const std::string& b);

// Candidates ordered by ascending perplexity on the wild-type backbone;
// ties break lexicographically by sequence. The encoder runs once.
std::vector<std::pair<std::string, double>> rank_by_perplexity(
    const Model& model, const MultiGraph& wild_type_graph,
    const std::vector<std::string>& candidates);

// Median and interquartile range of max(fitness) - wt_fitness over n_sims
// draws of `budget` records without replacement. Budgets above the pool size
// clamp (flagged). Each simulation uses its own child stream.
BudgetReport simulate_baseline(const std::vector<FitnessRecord>& pool,
                               const std::string& strategy_name, double wt_fitness,
                               std::size_t budget, std::size_t n_sims, RngStream& rng);

// The three random baselines plus the deterministic perplexity strategy for
// every budget.
std::vector<BudgetReport> evaluate_strategies(const std::vector<FitnessRecord>& records,
                                              const Model& model,
                                              const MultiGraph& wild_type_graph,
                                              const std::string& wild_type_sequence,
                                              const std::vector<std::size_t>& budgets,
                                              std::size_t n_sims, RngStream& rng);

std::string budget_reports_to_csv(const std::vector<BudgetReport>& reports);
std::string budget_reports_to_json(const std::vector<BudgetReport>& reports);

// Linear-interpolation quantile of a sorted sample (numpy-style), exposed for
// the order-statistics checks.
double quantile_sorted(const std::vector<double>& sorted, double p);

}  // namespace rnadesign

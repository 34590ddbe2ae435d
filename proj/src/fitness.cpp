#include "rnadesign/fitness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "rnadesign/sampling.hpp"

namespace rnadesign {

int hamming_distance(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) throw std::invalid_argument("hamming_distance: lengths differ");
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) ++d;
    return d;
}

std::vector<FitnessRecord> parse_landscape_csv(const std::string& text,
                                               const std::string& wild_type) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("landscape: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "sequence,fitness")
        throw std::invalid_argument("landscape: expected header 'sequence,fitness'");
    std::vector<FitnessRecord> out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::invalid_argument("landscape: missing comma on line " +
                                        std::to_string(lineno));
        FitnessRecord r;
        r.sequence = line.substr(0, comma);
        try {
            r.fitness = std::stod(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw std::invalid_argument("landscape: bad fitness on line " +
                                        std::to_string(lineno));
        }
        r.mutation_order = hamming_distance(r.sequence, wild_type);
        out.push_back(std::move(r));
    }
    if (out.empty()) throw std::invalid_argument("landscape: no records");
    return out;
}

std::vector<FitnessRecord> read_landscape_file(const std::string& path,
                                               const std::string& wild_type) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open landscape: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_landscape_csv(ss.str(), wild_type);
}

std::vector<std::pair<std::string, double>> rank_by_perplexity(
    const Model& model, const MultiGraph& wild_type_graph,
    const std::vector<std::string>& candidates) {
    const Model::Encoded enc = model.encode(wild_type_graph, false, nullptr);
    std::vector<std::pair<std::string, double>> out;
    out.reserve(candidates.size());
    for (const auto& cand : candidates) {
        if (static_cast<std::int64_t>(cand.size()) != wild_type_graph.n)
            throw std::invalid_argument("rank_by_perplexity: candidate length mismatch: " +
                                        cand);
        std::vector<int> bases(cand.size());
        for (std::size_t i = 0; i < cand.size(); ++i) bases[i] = base_index(cand[i]);
        const Tensor logits = model.decode(enc, bases, false, nullptr);
        double nll = 0.0;
        for (std::int64_t i = 0; i < wild_type_graph.n; ++i) {
            const double* row = logits.data().data() + 4 * i;
            const double zmax = std::max(std::max(row[0], row[1]), std::max(row[2], row[3]));
            double sum = 0.0;
            for (int j = 0; j < 4; ++j) sum += std::exp(row[j] - zmax);
            nll -= row[bases[static_cast<std::size_t>(i)]] - zmax - std::log(sum);
        }
        out.emplace_back(cand, std::exp(nll / static_cast<double>(wild_type_graph.n)));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });
    return out;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

BudgetReport simulate_baseline(const std::vector<FitnessRecord>& pool,
                               const std::string& strategy_name, double wt_fitness,
                               std::size_t budget, std::size_t n_sims, RngStream& rng) {
    if (pool.empty()) throw std::invalid_argument("simulate_baseline: empty pool");
    BudgetReport rep;
    rep.strategy = strategy_name;
    rep.budget = budget;
    rep.stochastic = true;
    std::size_t take = budget;
    if (take > pool.size()) {
        take = pool.size();
        rep.clamped = true;
    }
    if (take == 0) {
        rep.median_max_improvement = 0.0;
        rep.q25 = rep.q75 = 0.0;
        return rep;
    }
    std::vector<double> improvements(n_sims);
    for (std::size_t s = 0; s < n_sims; ++s) {
        RngStream srng = rng.child(static_cast<std::uint64_t>(s));
        auto idx = srng.sample_without_replacement(pool.size(), take);
        double best = -std::numeric_limits<double>::infinity();
        for (auto i : idx) best = std::max(best, pool[i].fitness);
        improvements[s] = best - wt_fitness;
    }
    std::sort(improvements.begin(), improvements.end());
    rep.median_max_improvement = quantile_sorted(improvements, 0.5);
    rep.q25 = quantile_sorted(improvements, 0.25);
    rep.q75 = quantile_sorted(improvements, 0.75);
    return rep;
}

std::vector<BudgetReport> evaluate_strategies(const std::vector<FitnessRecord>& records,
                                              const Model& model,
                                              const MultiGraph& wild_type_graph,
                                              const std::string& wild_type_sequence,
                                              const std::vector<std::size_t>& budgets,
                                              std::size_t n_sims, RngStream& rng) {
    double wt_fitness = 0.0;
    bool have_wt = false;
    for (const auto& r : records) {
        if (r.sequence == wild_type_sequence) {
            wt_fitness = r.fitness;
            have_wt = true;
            break;
        }
    }
    if (!have_wt)
        throw std::invalid_argument("evaluate_strategies: wild type missing from records");

    std::vector<FitnessRecord> singles, singles_doubles;
    for (const auto& r : records) {
        if (r.mutation_order == 1) singles.push_back(r);
        if (r.mutation_order == 1 || r.mutation_order == 2) singles_doubles.push_back(r);
    }

    std::vector<std::string> candidates;
    candidates.reserve(records.size());
    for (const auto& r : records) candidates.push_back(r.sequence);
    const auto ranked = rank_by_perplexity(model, wild_type_graph, candidates);
    // Fitness lookup for the deterministic strategy.
    std::vector<double> ranked_fitness(ranked.size());
    {
        std::map<std::string, double> by_seq;
        for (const auto& r : records) by_seq[r.sequence] = r.fitness;
        for (std::size_t i = 0; i < ranked.size(); ++i)
            ranked_fitness[i] = by_seq.at(ranked[i].first);
    }

    std::vector<BudgetReport> out;
    for (std::size_t budget : budgets) {
        struct PoolDef {
            const char* name;
            const std::vector<FitnessRecord>* pool;
        };
        const PoolDef pools[] = {{"random_all", &records},
                                 {"random_single", &singles},
                                 {"random_single_double", &singles_doubles}};
        for (const auto& p : pools) {
            RngStream prng = rng.child(p.name).child(static_cast<std::uint64_t>(budget));
            out.push_back(simulate_baseline(*p.pool, p.name, wt_fitness, budget, n_sims, prng));
        }

        BudgetReport det;
        det.strategy = "model_perplexity";
        det.budget = budget;
        det.stochastic = false;
        const std::size_t take = std::min(budget, ranked.size());
        det.clamped = take < budget;
        if (take == 0) {
            det.median_max_improvement = 0.0;  // screening nothing improves nothing
        } else {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < take; ++i)
                best = std::max(best, ranked_fitness[i] - wt_fitness);
            det.median_max_improvement = best;
        }
        out.push_back(det);
    }
    return out;
}

std::string budget_reports_to_csv(const std::vector<BudgetReport>& reports) {
    std::ostringstream os;
    os << "strategy,budget,median_max_improvement,q25,q75,clamped\n";
    os.precision(12);
    for (const auto& r : reports) {
        os << r.strategy << "," << r.budget << "," << r.median_max_improvement << ",";
        if (r.stochastic)
            os << r.q25 << "," << r.q75;
        else
            os << ",";
        os << "," << (r.clamped ? 1 : 0) << "\n";
    }
    return os.str();
}

std::string budget_reports_to_json(const std::vector<BudgetReport>& reports) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) {
        nlohmann::json j;
        j["strategy"] = r.strategy;
        j["budget"] = r.budget;
        j["median_max_improvement"] = r.median_max_improvement;
        if (r.stochastic) {
            j["q25"] = r.q25;
            j["q75"] = r.q75;
        }
        j["clamped"] = r.clamped;
        arr.push_back(j);
    }
    return arr.dump(2) + "\n";
}

}  // namespace rnadesign

#include "rnadesign/secondary.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace rnadesign {

void SecondaryStructure::validate() const {
    std::vector<int> partner(static_cast<std::size_t>(n), -1);
    for (const auto& [i, j] : pairs) {
        if (i < 0 || j >= n || i >= j)
            throw std::invalid_argument("secondary structure: bad pair indices");
        if (j - i < kMinLoopLen + 1)
            throw std::invalid_argument("secondary structure: loop shorter than minimum");
        if (partner[static_cast<std::size_t>(i)] >= 0 || partner[static_cast<std::size_t>(j)] >= 0)
            throw std::invalid_argument("secondary structure: nucleotide paired twice");
        partner[static_cast<std::size_t>(i)] = j;
        partner[static_cast<std::size_t>(j)] = i;
    }
}

std::string SecondaryStructure::dot_bracket() const {
    std::string s(static_cast<std::size_t>(n), '.');
    for (const auto& [i, j] : pairs) {
        for (const auto& [a, b] : pairs)
            if (a < i && i < b && b < j)
                throw std::invalid_argument("dot_bracket: crossing pairs are not representable");
        s[static_cast<std::size_t>(i)] = '(';
        s[static_cast<std::size_t>(j)] = ')';
    }
    return s;
}

bool bases_pair(char a, char b) {
    auto canon = [](char c) { return static_cast<char>(std::toupper(c)); };
    const char x = canon(a), y = canon(b);
    return (x == 'A' && y == 'U') || (x == 'U' && y == 'A') || (x == 'G' && y == 'C') ||
           (x == 'C' && y == 'G') || (x == 'G' && y == 'U') || (x == 'U' && y == 'G');
}

SecondaryStructure nussinov_fold(const std::string& seq) {
    const int n = static_cast<int>(seq.size());
    if (n < 1) throw std::invalid_argument("nussinov_fold: empty sequence");
    SecondaryStructure out;
    out.n = n;
    if (n < kMinLoopLen + 2) return out;

    // best[i][j] = max pairs over s[i..j]
    std::vector<std::vector<int>> best(static_cast<std::size_t>(n),
                                       std::vector<int>(static_cast<std::size_t>(n), 0));
    for (int span = kMinLoopLen + 1; span < n; ++span) {
        for (int i = 0; i + span < n; ++i) {
            const int j = i + span;
            int v = best[i + 1][j];  // i unpaired
            for (int k = i + kMinLoopLen + 1; k <= j; ++k) {
                if (!bases_pair(seq[static_cast<std::size_t>(i)], seq[static_cast<std::size_t>(k)]))
                    continue;
                const int inner = best[i + 1][k - 1];
                const int right = k < j ? best[k + 1][j] : 0;
                v = std::max(v, 1 + inner + right);
            }
            best[i][j] = v;
        }
    }

    // Iterative traceback; the 5'-unpaired branch wins ties, then the
    // leftmost partner.
    std::vector<std::pair<int, int>> stack = {{0, n - 1}};
    while (!stack.empty()) {
        auto [i, j] = stack.back();
        stack.pop_back();
        if (i >= j || best[i][j] == 0) continue;
        if (best[i][j] == best[i + 1][j]) {
            stack.emplace_back(i + 1, j);
            continue;
        }
        for (int k = i + kMinLoopLen + 1; k <= j; ++k) {
            if (!bases_pair(seq[static_cast<std::size_t>(i)], seq[static_cast<std::size_t>(k)]))
                continue;
            const int inner = best[i + 1][k - 1];
            const int right = k < j ? best[k + 1][j] : 0;
            if (best[i][j] == 1 + inner + right) {
                out.pairs.emplace_back(i, k);
                stack.emplace_back(i + 1, k - 1);
                if (k < j) stack.emplace_back(k + 1, j);
                break;
            }
        }
    }
    std::sort(out.pairs.begin(), out.pairs.end());
    out.validate();
    return out;
}

SecondaryStructure pairs_from_structure(const RnaStructure& s) {
    const int n = static_cast<int>(s.length());
    SecondaryStructure out;
    out.n = n;
    struct Cand {
        double dev;
        int i, j;
    };
    std::vector<Cand> cands;
    for (int i = 0; i < n; ++i) {
        if (!s.bead_present[static_cast<std::size_t>(i)][kBeadN]) continue;
        for (int j = i + kMinLoopLen + 1; j < n; ++j) {
            if (!s.bead_present[static_cast<std::size_t>(j)][kBeadN]) continue;
            if (!bases_pair(s.sequence[static_cast<std::size_t>(i)],
                            s.sequence[static_cast<std::size_t>(j)]))
                continue;
            const double d = distance(s.beads[static_cast<std::size_t>(i)][kBeadN],
                                      s.beads[static_cast<std::size_t>(j)][kBeadN]);
            const double dev = std::abs(d - kPairDistance);
            if (dev <= kPairWindow) cands.push_back({dev, i, j});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.dev != b.dev) return a.dev < b.dev;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (const auto& c : cands) {
        if (used[static_cast<std::size_t>(c.i)] || used[static_cast<std::size_t>(c.j)]) continue;
        used[static_cast<std::size_t>(c.i)] = used[static_cast<std::size_t>(c.j)] = true;
        out.pairs.emplace_back(c.i, c.j);
    }
    std::sort(out.pairs.begin(), out.pairs.end());
    out.validate();
    return out;
}

SecondaryStructure parse_dot_bracket(const std::string& line) {
    SecondaryStructure out;
    out.n = static_cast<int>(line.size());
    std::vector<int> stack;
    for (int i = 0; i < out.n; ++i) {
        const char c = line[static_cast<std::size_t>(i)];
        if (c == '(') {
            stack.push_back(i);
        } else if (c == ')') {
            if (stack.empty()) throw std::invalid_argument("dot-bracket: unbalanced ')'");
            out.pairs.emplace_back(stack.back(), i);
            stack.pop_back();
        } else if (c != '.') {
            throw std::invalid_argument("dot-bracket: unexpected character");
        }
    }
    if (!stack.empty()) throw std::invalid_argument("dot-bracket: unbalanced '('");
    std::sort(out.pairs.begin(), out.pairs.end());
    out.validate();
    return out;
}

double mcc(const SecondaryStructure& pred, const SecondaryStructure& truth) {
    if (pred.n != truth.n) throw std::invalid_argument("mcc: structure sizes differ");
    const int n = pred.n;
    std::int64_t candidates = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + kMinLoopLen + 1; j < n; ++j) ++candidates;

    auto key = [n](int i, int j) { return static_cast<std::int64_t>(i) * n + j; };
    std::vector<std::int64_t> p, t;
    for (auto& [i, j] : pred.pairs) p.push_back(key(i, j));
    for (auto& [i, j] : truth.pairs) t.push_back(key(i, j));
    std::sort(p.begin(), p.end());
    std::sort(t.begin(), t.end());
    std::vector<std::int64_t> inter;
    std::set_intersection(p.begin(), p.end(), t.begin(), t.end(), std::back_inserter(inter));

    const double tp = static_cast<double>(inter.size());
    const double fp = static_cast<double>(p.size()) - tp;
    const double fn = static_cast<double>(t.size()) - tp;
    const double tn = static_cast<double>(candidates) - tp - fp - fn;
    const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (denom <= 0.0) return 0.0;
    return (tp * tn - fp * fn) / std::sqrt(denom);
}

double self_consistency(const Model& model, const Ensemble& e, const FeaturizerConfig& fcfg,
                        int n_samples, double temperature, RngStream& rng,
                        const std::vector<SecondaryStructure>* truth_override) {
    std::vector<SecondaryStructure> truths;
    if (truth_override) {
        truths = *truth_override;
    } else {
        for (const auto& st : e.states) truths.push_back(pairs_from_structure(st));
    }
    if (truths.empty()) throw std::invalid_argument("self_consistency: no ground truth");

    const MultiGraph mg = featurize_ensemble(e, fcfg, nullptr);
    SampleOptions opt;
    opt.temperature = temperature;
    double acc = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        RngStream srng = rng.child(static_cast<std::uint64_t>(s));
        const DesignResult d = sample(model, mg, opt, srng);
        // Designs cover the graph's kept nodes; fold that subsequence and
        // compare against the truth restricted the same way.
        SecondaryStructure folded = nussinov_fold(d.sequence);
        for (const auto& truth : truths) {
            SecondaryStructure t2 = truth;
            if (truth.n != folded.n) {
                // Restrict to kept nodes when masking dropped residues.
                std::vector<int> remap(static_cast<std::size_t>(truth.n), -1);
                for (std::size_t g = 0; g < mg.orig_index.size(); ++g)
                    remap[static_cast<std::size_t>(mg.orig_index[g])] = static_cast<int>(g);
                t2 = SecondaryStructure{};
                t2.n = folded.n;
                for (auto& [i, j] : truth.pairs) {
                    const int a = remap[static_cast<std::size_t>(i)];
                    const int b = remap[static_cast<std::size_t>(j)];
                    if (a >= 0 && b >= 0 && b - a >= kMinLoopLen + 1) t2.pairs.emplace_back(a, b);
                }
            }
            acc += mcc(folded, t2);
        }
    }
    return acc / (static_cast<double>(n_samples) * static_cast<double>(truths.size()));
}

std::vector<EvalRow> evaluate_ensembles(const Model& model, const std::vector<Ensemble>& list,
                                        const FeaturizerConfig& fcfg, int n_samples,
                                        double temperature, int max_states, RngStream& rng) {
    std::vector<EvalRow> rows;
    rows.reserve(list.size());
    SampleOptions opt;
    opt.temperature = temperature;
    for (const auto& e0 : list) {
        const Ensemble e = select_states(e0, max_states, false, nullptr);
        const MultiGraph mg = featurize_ensemble(e, fcfg, nullptr);
        std::string native;
        for (int oi : mg.orig_index) native.push_back(e.sequence[static_cast<std::size_t>(oi)]);

        EvalRow row;
        row.id = e.id;
        RngStream erng = rng.child(e.id);
        double rec = 0.0;
        for (int s = 0; s < n_samples; ++s) {
            RngStream srng = erng.child(static_cast<std::uint64_t>(s));
            const DesignResult d = sample(model, mg, opt, srng);
            rec += recovery(d.sequence, native);
        }
        row.recovery = rec / n_samples;
        row.perplexity = perplexity(model, mg, native);
        RngStream scrng = erng.child("self_consistency");
        row.mcc = self_consistency(model, e, fcfg, n_samples, temperature, scrng);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace rnadesign

#include "rnadesign/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rnadesign {

namespace {

std::array<double, 4> log_softmax4(const std::array<double, 4>& z) {
    const double zmax = std::max(std::max(z[0], z[1]), std::max(z[2], z[3]));
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    const double lse = zmax + std::log(sum);
    return {z[0] - lse, z[1] - lse, z[2] - lse, z[3] - lse};
}

std::array<double, 4> logits_row(const Tensor& logits, std::int64_t i) {
    const auto& d = logits.data();
    return {d[static_cast<std::size_t>(4 * i)], d[static_cast<std::size_t>(4 * i + 1)],
            d[static_cast<std::size_t>(4 * i + 2)], d[static_cast<std::size_t>(4 * i + 3)]};
}

int sample_categorical(const std::array<double, 4>& logp, RngStream& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (int j = 0; j < 4; ++j) {
        acc += std::exp(logp[j]);
        if (u < acc) return j;
    }
    return 3;  // guard against accumulated rounding
}

}  // namespace

DesignResult sample(const Model& model, const MultiGraph& mg, const SampleOptions& opt,
                    RngStream& rng) {
    if (opt.temperature <= 0.0) throw std::invalid_argument("sample: temperature must be > 0");
    const std::int64_t n = mg.n;
    if (opt.fixed && static_cast<std::int64_t>(opt.fixed->size()) != n)
        throw std::invalid_argument("sample: fixed-position mask length mismatch");
    if (opt.logit_bias && static_cast<std::int64_t>(opt.logit_bias->size()) != n)
        throw std::invalid_argument("sample: logit bias length mismatch");

    const Model::Encoded enc = model.encode(mg, false, nullptr);
    const bool ar = model.config().decoder_kind == DecoderKind::AR;
    std::vector<int> bases(static_cast<std::size_t>(n), -1);

    DesignResult res;
    res.per_position_logprob.assign(static_cast<std::size_t>(n), 0.0);

    Tensor nar_logits;
    if (!ar) nar_logits = model.decode(enc, bases, false, nullptr);

    // Decode in 5'->3' sequence order regardless of node storage order.
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
        return enc.seq_pos[static_cast<std::size_t>(a)] < enc.seq_pos[static_cast<std::size_t>(b)];
    });

    for (std::int64_t i : order) {
        Tensor step_logits = ar ? model.decode(enc, bases, false, nullptr) : nar_logits;
        std::array<double, 4> z = logits_row(step_logits, i);
        if (opt.logit_bias)
            for (int j = 0; j < 4; ++j) z[j] += (*opt.logit_bias)[static_cast<std::size_t>(i)][j];

        const std::array<double, 4> logp = log_softmax4(z);
        int choice;
        if (opt.fixed && (*opt.fixed)[static_cast<std::size_t>(i)] >= 0) {
            choice = (*opt.fixed)[static_cast<std::size_t>(i)];
            if (choice > 3) throw std::invalid_argument("sample: fixed base out of range");
        } else if (opt.temperature < 1e-4) {
            choice = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
        } else {
            std::array<double, 4> tempered;
            for (int j = 0; j < 4; ++j) tempered[j] = z[j] / opt.temperature;
            choice = sample_categorical(log_softmax4(tempered), rng);
        }
        bases[static_cast<std::size_t>(i)] = choice;
        res.per_position_logprob[static_cast<std::size_t>(i)] = logp[choice];
    }

    for (int b : bases) res.sequence.push_back(base_char(b));
    double mean_nll = 0.0;
    for (double lp : res.per_position_logprob) mean_nll -= lp;
    mean_nll /= static_cast<double>(n);
    res.perplexity = std::exp(mean_nll);
    return res;
}

double recovery(const std::string& designed, const std::string& native,
                const std::vector<bool>* designed_mask) {
    if (designed.size() != native.size())
        throw std::invalid_argument("recovery: sequence lengths differ");
    if (designed_mask && designed_mask->size() != designed.size())
        throw std::invalid_argument("recovery: mask length mismatch");
    std::size_t counted = 0, matched = 0;
    for (std::size_t i = 0; i < designed.size(); ++i) {
        if (designed_mask && !(*designed_mask)[i]) continue;
        ++counted;
        if (designed[i] == native[i]) ++matched;
    }
    if (counted == 0) return 1.0;
    return static_cast<double>(matched) / static_cast<double>(counted);
}

double perplexity_from_logits(const std::vector<std::array<double, 4>>& logits,
                              const std::vector<int>& targets) {
    if (logits.empty() || logits.size() != targets.size())
        throw std::invalid_argument("perplexity_from_logits: size mismatch");
    double mean_nll = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const auto logp = log_softmax4(logits[i]);
        const int t = targets[i];
        if (t < 0 || t > 3) throw std::invalid_argument("perplexity_from_logits: bad target");
        mean_nll -= logp[t];
    }
    return std::exp(mean_nll / static_cast<double>(logits.size()));
}

double perplexity(const Model& model, const MultiGraph& mg, const std::string& sequence) {
    if (static_cast<std::int64_t>(sequence.size()) != mg.n)
        throw std::invalid_argument("perplexity: sequence length mismatch");
    std::vector<int> bases(sequence.size());
    for (std::size_t i = 0; i < sequence.size(); ++i) bases[i] = base_index(sequence[i]);
    const Tensor logits = model.logits(mg, bases, false, nullptr);
    double mean_nll = 0.0;
    for (std::int64_t i = 0; i < mg.n; ++i) {
        const auto logp = log_softmax4(logits_row(logits, i));
        mean_nll -= logp[bases[static_cast<std::size_t>(i)]];
    }
    return std::exp(mean_nll / static_cast<double>(mg.n));
}

Ensemble select_states(const Ensemble& e, int max_states, bool training, RngStream* rng) {
    if (max_states < 1) throw std::invalid_argument("select_states: max_states must be >= 1");
    const int k = static_cast<int>(e.states.size());
    if (k <= max_states) return e;
    Ensemble out;
    out.id = e.id;
    out.sequence = e.sequence;
    if (training) {
        if (!rng) throw std::invalid_argument("select_states: training selection needs an rng");
        auto pick = rng->sample_without_replacement(static_cast<std::size_t>(k),
                                                    static_cast<std::size_t>(max_states));
        std::sort(pick.begin(), pick.end());  // keep original state order
        for (auto idx : pick) out.states.push_back(e.states[idx]);
    } else {
        std::vector<const RnaStructure*> sorted;
        for (const auto& s : e.states) sorted.push_back(&s);
        std::sort(sorted.begin(), sorted.end(),
                  [](const RnaStructure* a, const RnaStructure* b) { return a->id < b->id; });
        for (int i = 0; i < max_states; ++i) out.states.push_back(*sorted[static_cast<std::size_t>(i)]);
    }
    return out;
}

}  // namespace rnadesign

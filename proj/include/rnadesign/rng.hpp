#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace rnadesign {

// Deterministic random stream. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; the distribution mappings are implemented
// here by hand because std::*_distribution results vary across library
// implementations.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);

    // Derives an independent child stream without consuming draws from this
    // one. Rule: child_seed = splitmix64(seed ^ splitmix64(tag)).
    RngStream child(std::uint64_t tag) const;
    RngStream child(const std::string& tag) const;

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    // Uniform integer in [0, n), n > 0. Rejection sampled, unbiased.
    std::uint64_t uniform_int(std::uint64_t n);
    // Standard normal via Box-Muller.
    double normal();
    double normal(double mean, double stddev);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices drawn uniformly from [0, n), in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

    std::uint64_t seed() const { return seed_; }

    // Full engine state as text, for resumable training runs.
    std::string state_string() const;
    void set_state_string(const std::string& s);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool have_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

// splitmix64 step; exposed because seed-derivation rules elsewhere reuse it.
std::uint64_t splitmix64(std::uint64_t x);

// Stable 64-bit FNV-1a hash, used for tagged child streams.
std::uint64_t hash64(const std::string& s);

}  // namespace rnadesign

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace qmap {

// Deterministic random stream. Every stochastic choice in the pipeline
// (weight init, dropout masks, shuffles, splits, synthetic noise) pulls from
// a named substream of a single run seed, so a run is reproducible from the
// seed alone. Distribution mapping is done by hand because the standard
// library only pins down the engine, not the distributions.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    // Independent substream identified by (parent seed, name, index).
    Rng substream(const std::string& name, uint64_t index = 0) const;

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0,1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);

    // Standard normal via Box-Muller (pair cached).
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [0, n).
    uint64_t uniform_int(uint64_t n);

    bool bernoulli(double p) { return uniform() < p; }

    // Fisher-Yates, fixed traversal order.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (size_t i = v.size() - 1; i > 0; --i) {
            size_t j = static_cast<size_t>(uniform_int(i + 1));
            std::swap(v[i], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;

    uint64_t seed_of() const;
};

} // namespace qmap

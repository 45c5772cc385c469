#pragma once

#include <cstdint>
#include <vector>

namespace calibra {

inline constexpr const char* kRngVersion = "calibra-rng/xoshiro256ss-splitmix64/1";

std::uint64_t splitmix64(std::uint64_t& state);

// key = (master_seed, replicate, stream); independent of evaluation order
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t replicate, std::uint64_t stream = 0);

class Rng {
public:
    explicit Rng(std::uint64_t seed);
    Rng(std::uint64_t master_seed, std::uint64_t replicate, std::uint64_t stream)
        : Rng(derive_seed(master_seed, replicate, stream)) {}

    std::uint64_t next();
    double uniform();                        // [0, 1)
    std::uint64_t below(std::uint64_t bound);  // [0, bound)
    double normal();
    bool bernoulli(double p) { return uniform() < p; }

    // k distinct indices from [0, n), in draw order
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);
    void shuffle(std::vector<std::size_t>& v);

private:
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}

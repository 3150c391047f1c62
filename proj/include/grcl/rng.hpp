#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace grcl {

/// splitmix64 mixing step, used to derive independent seed streams from a
/// master seed plus a stream tag. Keeps every sampler reproducible from the
/// single run seed without correlated streams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    Rng(std::uint64_t seed, std::uint64_t tag) : gen_(mix_seed(seed, tag)) {}

    /// Uniform integer in [0, n).
    std::int64_t uniform_below(std::int64_t n) {
        return std::uniform_int_distribution<std::int64_t>(0, n - 1)(gen_);
    }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }

    double gaussian(double mean, double stddev) {
        return std::normal_distribution<double>(mean, stddev)(gen_);
    }

    bool bernoulli(double p) { return std::bernoulli_distribution(p)(gen_); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), gen_);
    }

    std::mt19937_64& engine() { return gen_; }

  private:
    std::mt19937_64 gen_;
};

}  // namespace grcl

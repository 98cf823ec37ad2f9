#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffan {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

// Input/contract violations. The CLI maps these to exit code 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failures (NaN activations, factorization failure, divergence).
// The CLI maps these to exit code 3.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// splitmix64 step; used to derive independent substream seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Sample `k` distinct row indices out of `n` (k <= n), deterministic in rng.
std::vector<int> sample_without_replacement(int n, int k, Rng& rng);

// Runs fn(i) for i in [0, count) on up to max_threads() workers. Tasks must be
// independent; results are deterministic because each index owns its output.
void parallel_for(int count, const std::function<void(int)>& fn);

// Global worker cap (CLI --threads). 0 = hardware concurrency.
void set_max_threads(int n);
int max_threads();

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

}  // namespace diffan

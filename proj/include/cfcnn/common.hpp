#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace cfcnn {

// Raised when an input violates a documented invariant or precondition.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when training hits a non-finite objective. The CLI maps this to
// exit code 2 after persisting the partial manifest.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

using Rng = std::mt19937_64;

// Derives an independent stream from a master seed. Streams are identified
// by a small integer tag so that adding a new consumer never perturbs the
// draws of existing ones.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<unsigned>(seed), static_cast<unsigned>(seed >> 32),
                      static_cast<unsigned>(stream), static_cast<unsigned>(stream >> 32)};
    return Rng(seq);
}

} // namespace cfcnn

#pragma once

#include <cstdint>
#include <random>

namespace amplasso {

using Rng = std::mt19937_64;

/// Purposes a replication draws randomness for. Each gets its own stream so
/// that changing how much one consumer draws never shifts another.
enum class Stream : std::uint64_t {
    prior = 1,
    design = 2,
    noise = 3,
    folds = 4,
    generic = 5,
};

/// Independent engine for (master seed, replication, purpose). Any
/// replication can be regenerated without touching the others.
Rng make_stream(std::uint64_t master_seed, std::uint64_t replication, Stream purpose);

/// Engine for a single seed, used where there is no replication structure.
Rng make_rng(std::uint64_t seed);

}  // namespace amplasso

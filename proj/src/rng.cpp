#include "amplasso/rng.hpp"

namespace amplasso {

Rng make_stream(std::uint64_t master_seed, std::uint64_t replication, Stream purpose)
{
    const auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
    const auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    const auto tag = static_cast<std::uint64_t>(purpose);
    std::seed_seq seq{lo(master_seed), hi(master_seed), lo(replication),
                      hi(replication), lo(tag),         0x5eedu};
    return Rng(seq);
}

Rng make_rng(std::uint64_t seed)
{
    return make_stream(seed, 0, Stream::generic);
}

}  // namespace amplasso

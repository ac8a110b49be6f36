#pragma once

#include <cstdint>
#include <random>

namespace fedsa {

using Rng = std::mt19937_64;

/// Disjoint stream domains. Every random quantity in a run is drawn from
/// make_stream(seed, domain, id) with id = client index (or 0 for shared
/// quantities), so streams never depend on evaluation order.
enum class StreamDomain : std::uint32_t {
    TaskParameters = 1, // true weights, per-client sigma choices
    Data = 2,           // training samples
    Init = 3,           // initial iterates
    Batches = 4,        // mini-batch index draws
    TestData = 5,       // held-out evaluation samples
};

inline Rng make_stream(std::uint64_t seed, StreamDomain domain, std::uint64_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(domain),
                      static_cast<std::uint32_t>(id),
                      static_cast<std::uint32_t>(id >> 32)};
    return Rng(seq);
}

} // namespace fedsa

#pragma once

// Master seed -> per-component random streams.
//
// Every stream in a run is keyed by (master seed, component tag, index) and
// derived with a counter-based splitter: the tag is hashed with FNV-1a, mixed
// with the master seed and the index, and finalized with splitmix64. Two
// streams never share state, so the order in which components run does not
// change any of their draws.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace hyper {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0);

inline std::mt19937_64 make_stream(std::uint64_t master, std::string_view tag,
                                   std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(master, tag, index));
}

// Lower-case 16-digit hex rendering of a 64-bit digest.
std::string hex64(std::uint64_t v);

}  // namespace hyper

#pragma once

#include <cstdint>
#include <string_view>

namespace gsstex {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Independent per-stage seed derived from the run's root seed.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view stage, std::uint64_t index = 0) {
    std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
    for (char c : stage) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return mix_seed(root ^ mix_seed(h ^ mix_seed(index)));
}

}  // namespace gsstex

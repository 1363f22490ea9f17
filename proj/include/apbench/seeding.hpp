#pragma once

#include <cstdint>
#include <string_view>

namespace apbench {

// splitmix64 finalizer. Good avalanche, cheap, stable across platforms.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Derives the seed for stream `stream` from a single root seed. Every RNG in
// the toolkit is seeded through this function, so one root seed fully
// determines all generated data and all training randomness.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
    return splitmix64(root ^ splitmix64(stream + 0x9e3779b97f4a7c15ull));
}

// FNV-1a over raw bytes. Used for content fingerprints in dataset manifests.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace apbench

#pragma once

// Seed derivation. Every random stream in the project is seeded from one
// base seed mixed with a stage tag and the indices of the unit of work, so
// parallel and serial schedules draw identical numbers.

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace hsi {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// FNV-1a of the tag.
constexpr std::uint64_t tag_hash(std::string_view tag) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                    std::initializer_list<std::uint64_t> indices = {}) noexcept {
    std::uint64_t s = splitmix64(base ^ splitmix64(tag_hash(tag)));
    for (std::uint64_t i : indices) s = splitmix64(s ^ splitmix64(i + 0x632BE59BD9B4E019ull));
    return s;
}

}  // namespace hsi

#pragma once

#include <cstdint>
#include <string>

namespace spectrum {

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 14695981039346656037ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t seed = 14695981039346656037ull) {
    return fnv1a64(s.data(), s.size(), seed);
}

} // namespace spectrum

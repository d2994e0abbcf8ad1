#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace qmap {

// FNV-1a, used for data fingerprints and parameter checksums.
inline uint64_t fnv1a64(const void* bytes, size_t n, uint64_t seed = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string to_hex(uint64_t v);

// Fingerprint of a file's raw bytes. Throws IoError if unreadable.
uint64_t fingerprint_file(const std::string& path);

} // namespace qmap

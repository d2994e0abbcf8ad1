#include "qmap/hash.hpp"
#include "qmap/parallel.hpp"
#include "qmap/rng.hpp"
#include "qmap/errors.hpp"

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <fstream>

namespace qmap {

// ---- hash ----

std::string to_hex(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

uint64_t fingerprint_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path);
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (f) {
        f.read(buf, sizeof(buf));
        std::streamsize got = f.gcount();
        if (got > 0) h = fnv1a64(buf, static_cast<size_t>(got), h);
    }
    return h;
}

// ---- workers ----

namespace {
int g_workers = 0;
}

void set_workers(int n) {
    g_workers = n;
    if (n > 0) {
        omp_set_num_threads(n);
    } else {
        omp_set_num_threads(omp_get_num_procs());
    }
}

int workers() {
    if (g_workers > 0) return g_workers;
    return omp_get_num_procs();
}

// ---- rng ----

Rng Rng::substream(const std::string& name, uint64_t index) const {
    uint64_t h = fnv1a64(name.data(), name.size(), seed_of());
    h ^= index + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    // splitmix64 finalizer to decorrelate nearby indices
    h += 0x9e3779b97f4a7c15ULL;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    h = h ^ (h >> 31);
    return Rng(h);
}

uint64_t Rng::seed_of() const {
    // Hash of the engine state; cheap stand-in for carrying the seed around.
    // A copy is used so the parent stream is not advanced.
    std::mt19937_64 copy = engine_;
    uint64_t a = copy();
    uint64_t b = copy();
    return a ^ (b * 0x9e3779b97f4a7c15ULL);
}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

uint64_t Rng::uniform_int(uint64_t n) {
    if (n == 0) throw DomainError("uniform_int(0)");
    // rejection sampling to avoid modulo bias
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

} // namespace qmap

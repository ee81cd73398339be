#include "kseg/tensor.hpp"

#include <malloc.h>

#include <sstream>

extern "C" void openblas_set_num_threads(int);

namespace kseg {

namespace {

// Single-threaded BLAS keeps dot-product reduction order (and therefore every
// run) bit-exact. The raised malloc thresholds keep the multi-megabyte
// per-layer scratch buffers on the heap instead of round-tripping through
// mmap on every conv call.
struct RuntimeInit {
    RuntimeInit() {
        openblas_set_num_threads(1);
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
    }
} const runtime_init;

}  // namespace

std::string shape_str(const std::vector<int64_t>& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

uint64_t mix_seed(uint64_t a, uint64_t b) {
    return splitmix64(splitmix64(a) ^ (0x9e3779b97f4a7c15ull + b));
}

uint64_t fnv1a(const void* bytes, size_t n, uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace kseg

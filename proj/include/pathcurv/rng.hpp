#pragma once

// Counter-based random numbers (Philox-4x32-10). Draws are a pure function
// of (seed, stream, step, block), so path i step k sees the same Gaussians
// no matter how many workers run, how paths are batched, or which estimator
// asks first. That is what makes replay, common-random-number differencing
// and worker-count independence exact rather than approximate.

#include <cstdint>
#include <cmath>

namespace pathcurv {

namespace detail {

inline void mulhilo32(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

struct Philox4x32State {
  std::uint32_t c0, c1, c2, c3;
  std::uint32_t k0, k1;
};

inline void philox_round(Philox4x32State& s) {
  constexpr std::uint32_t M0 = 0xD2511F53u;
  constexpr std::uint32_t M1 = 0xCD9E8D57u;
  std::uint32_t hi0, lo0, hi1, lo1;
  mulhilo32(M0, s.c0, hi0, lo0);
  mulhilo32(M1, s.c2, hi1, lo1);
  const std::uint32_t n0 = hi1 ^ s.c1 ^ s.k0;
  const std::uint32_t n1 = lo1;
  const std::uint32_t n2 = hi0 ^ s.c3 ^ s.k1;
  const std::uint32_t n3 = lo0;
  s.c0 = n0;
  s.c1 = n1;
  s.c2 = n2;
  s.c3 = n3;
  constexpr std::uint32_t W0 = 0x9E3779B9u;
  constexpr std::uint32_t W1 = 0xBB67AE85u;
  s.k0 += W0;
  s.k1 += W1;
}

}  // namespace detail

struct Counter4 {
  std::uint32_t v0, v1, v2, v3;
};

// Ten Philox rounds on a 128-bit counter under a 64-bit key.
inline Counter4 philox4x32(std::uint64_t seed, Counter4 ctr) {
  detail::Philox4x32State s{ctr.v0, ctr.v1, ctr.v2, ctr.v3,
                            static_cast<std::uint32_t>(seed),
                            static_cast<std::uint32_t>(seed >> 32)};
  for (int r = 0; r < 10; ++r) detail::philox_round(s);
  return Counter4{s.c0, s.c1, s.c2, s.c3};
}

// splitmix64 finalizer; used to derive child stream ids (nested simulations,
// auxiliary samplers) without risk of counter collisions.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_stream(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b + 0x632BE59BD9B4E019ull));
}

struct NormalPair {
  double z0, z1;
};

// Two standard normals for (seed, stream, step, block) via Box-Muller on the
// four 32-bit words of one Philox call. Avoids std::normal_distribution,
// whose output is implementation-defined.
inline NormalPair normal_pair(std::uint64_t seed, std::uint64_t stream,
                              std::uint32_t step, std::uint32_t block) {
  const Counter4 r = philox4x32(
      seed, Counter4{static_cast<std::uint32_t>(stream),
                     static_cast<std::uint32_t>(stream >> 32), step, block});
  const std::uint64_t w0 = (static_cast<std::uint64_t>(r.v0) << 32) | r.v1;
  const std::uint64_t w1 = (static_cast<std::uint64_t>(r.v2) << 32) | r.v3;
  // u1 in (0,1]: never feeds 0 to log.
  const double u1 = (static_cast<double>(w0 >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(w1 >> 11) * 0x1.0p-53;
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 6.283185307179586476925286766559 * u2;
  return NormalPair{rad * std::cos(ang), rad * std::sin(ang)};
}

// One uniform double in [0,1).
inline double uniform01(std::uint64_t seed, std::uint64_t stream,
                        std::uint32_t step, std::uint32_t block) {
  const Counter4 r = philox4x32(
      seed, Counter4{static_cast<std::uint32_t>(stream),
                     static_cast<std::uint32_t>(stream >> 32), step, block});
  const std::uint64_t w0 = (static_cast<std::uint64_t>(r.v0) << 32) | r.v1;
  return static_cast<double>(w0 >> 11) * 0x1.0p-53;
}

// Fills normals z[0..n) for one (path, step). Blocks advance in pairs.
inline void fill_normals(std::uint64_t seed, std::uint64_t stream,
                         std::uint32_t step, double* z, int n) {
  for (int i = 0; i < n; i += 2) {
    const NormalPair p = normal_pair(seed, stream, step, static_cast<std::uint32_t>(i / 2));
    z[i] = p.z0;
    if (i + 1 < n) z[i + 1] = p.z1;
  }
}

}  // namespace pathcurv

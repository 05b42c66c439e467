#include "offpath/net/rng.hpp"

#include <cmath>

#include "offpath/contract.hpp"

namespace offpath::net {

std::uint64_t Rng::uniform(std::uint64_t lo, std::uint64_t hi) {
  expects(lo <= hi, "uniform: empty range");
  std::uint64_t span = hi - lo;
  if (span == ~std::uint64_t{0}) return engine_();
  std::uint64_t n = span + 1;
  // Reject the top 2^64 mod n values so every residue is equally likely.
  std::uint64_t reject = (~std::uint64_t{0} % n + 1) % n;
  std::uint64_t limit = ~std::uint64_t{0} - reject;
  for (;;) {
    std::uint64_t x = engine_();
    if (x <= limit) return lo + x % n;
  }
}

double Rng::unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::exponential(double mean) { return -mean * std::log1p(-unit()); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(root ^ splitmix64(h));
}

}  // namespace offpath::net

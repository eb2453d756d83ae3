#include "fedgru/rng.h"

#include <vector>

namespace fedgru {

Rng derive_rng(std::uint64_t master, std::initializer_list<std::uint64_t> stream) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (stream.size() + 1));
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(master);
  for (auto s : stream) push(s);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

double uniform(Rng& rng, double lo, double hi) {
  if (!(hi > lo)) return lo;
  const double u = std::generate_canonical<double, 53>(rng);
  const double v = lo + (hi - lo) * u;
  return v > hi ? hi : v;
}

}  // namespace fedgru

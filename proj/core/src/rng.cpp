#include "alc/rng.hpp"

#include <sstream>
#include <stdexcept>

namespace alc {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string Rng::state_string() const {
  std::ostringstream os;
  os << eng_;
  return os.str();
}

void Rng::set_state_string(const std::string& s) {
  std::istringstream is(s);
  is >> eng_;
  if (!is) throw std::invalid_argument("Rng: bad state string");
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix(base);
  h = splitmix(h ^ a);
  h = splitmix(h ^ b);
  h = splitmix(h ^ c);
  return h;
}

}  // namespace alc

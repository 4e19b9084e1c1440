#include "rbrl/common.hpp"

#include <sstream>

namespace rbrl {

std::string Rng::serialize() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::deserialize(const std::string& s) {
  std::istringstream is(s);
  is >> engine_;
  if (is.fail()) throw std::runtime_error("Rng::deserialize: malformed engine state");
}

}  // namespace rbrl

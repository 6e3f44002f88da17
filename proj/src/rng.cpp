#include "lscm/rng.hpp"

#include <cmath>
#include <numeric>

namespace lscm {

std::vector<std::size_t> random_permutation(std::size_t n, Engine& eng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  shuffle_in_place(std::span<std::size_t>(perm), eng);
  return perm;
}

double NormalSampler::operator()(Engine& eng) {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * static_cast<double>(eng() >> 11) * scale - 1.0;
    v = 2.0 * static_cast<double>(eng() >> 11) * scale - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

}  // namespace lscm

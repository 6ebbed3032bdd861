#include "onphase/potts.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "onphase/error.hpp"

namespace onphase::lattice {

// Vertex a of the simplex is the centered basis vector e_a - 1/(N+1) written
// in the Helmert basis of the sum-zero hyperplane of R^(N+1), scaled to unit
// length. The Helmert vectors are orthogonal to (1, ..., 1), so the
// coordinates reduce to sqrt((N+1)/N) h_i[a].
PottsBasis::PottsBasis(std::size_t ncomp) : ncomp_(ncomp) {
  if (ncomp_ == 0) throw Error(ErrorKind::Domain, "Potts basis needs N >= 1");
  const std::size_t states = ncomp_ + 1;
  const double n = static_cast<double>(ncomp_);
  const double scale = std::sqrt((n + 1.0) / n);
  vectors_.assign(states * ncomp_, 0.0);
  for (std::size_t i = 0; i < ncomp_; ++i) {
    const double k = static_cast<double>(i + 1);
    const double norm = std::sqrt(k * (k + 1.0));
    // h_i = (1, ..., 1, -k, 0, ...) / sqrt(k(k+1)) with k ones.
    for (std::size_t a = 0; a < states; ++a) {
      double h = 0.0;
      if (a < i + 1) h = 1.0 / norm;
      else if (a == i + 1) h = -k / norm;
      vectors_[a * ncomp_ + i] = scale * h;
    }
  }
}

double PottsBasis::identity_residual() const {
  const double n = static_cast<double>(ncomp_);
  double worst = 0.0;
  for (std::size_t a = 0; a < state_count(); ++a) {
    for (std::size_t b = 0; b < state_count(); ++b) {
      const auto ea = state(a);
      const auto eb = state(b);
      const double dot = std::inner_product(ea.begin(), ea.end(), eb.begin(), 0.0);
      const double expected = (a == b ? (n + 1.0) / n : 0.0) - 1.0 / n;
      worst = std::max(worst, std::abs(dot - expected));
    }
  }
  return worst;
}

PottsBasis potts_basis(std::size_t ncomp) { return PottsBasis(ncomp); }

CouplingTensors coupling_tensors(const PottsBasis& basis) {
  const std::size_t n = basis.ncomp();
  if (n > 32) {
    throw Error(ErrorKind::Capacity, "quartic tensors limited to N <= 32 (N^4 entries each)");
  }
  CouplingTensors t;
  t.ncomp = n;
  t.cubic.assign(n * n * n, 0.0);
  t.quartic_f.assign(n * n * n * n, 0.0);
  t.quartic_s.assign(n * n * n * n, 0.0);

  for (std::size_t a = 0; a < basis.state_count(); ++a) {
    const auto e = basis.state(a);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double eij = e[i] * e[j];
        for (std::size_t k = 0; k < n; ++k) {
          const double eijk = eij * e[k];
          t.cubic[(i * n + j) * n + k] += eijk;
          for (std::size_t l = 0; l < n; ++l) {
            t.quartic_f[((i * n + j) * n + k) * n + l] += eijk * e[l];
          }
        }
      }
    }
  }
  auto delta = [](std::size_t x, std::size_t y) { return x == y ? 1.0 : 0.0; };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l)
          t.quartic_s[((i * n + j) * n + k) * n + l] =
              (delta(i, j) * delta(k, l) + delta(i, k) * delta(j, l) +
               delta(i, l) * delta(j, k)) / 3.0;
  return t;
}

double CouplingTensors::max_asymmetry() const {
  const std::size_t n = ncomp;
  double worst = 0.0;
  std::array<std::size_t, 3> idx3{};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) {
        idx3 = {i, j, k};
        const double ref = q(i, j, k);
        std::sort(idx3.begin(), idx3.end());
        do {
          worst = std::max(worst, std::abs(q(idx3[0], idx3[1], idx3[2]) - ref));
        } while (std::next_permutation(idx3.begin(), idx3.end()));
      }
  std::array<std::size_t, 4> idx4{};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) {
          idx4 = {i, j, k, l};
          const double rf = f(i, j, k, l);
          const double rs = s(i, j, k, l);
          std::sort(idx4.begin(), idx4.end());
          do {
            worst = std::max(worst, std::abs(f(idx4[0], idx4[1], idx4[2], idx4[3]) - rf));
            worst = std::max(worst, std::abs(s(idx4[0], idx4[1], idx4[2], idx4[3]) - rs));
          } while (std::next_permutation(idx4.begin(), idx4.end()));
        }
  return worst;
}

}  // namespace onphase::lattice

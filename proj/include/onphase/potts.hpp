#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace onphase::lattice {

/// N+1 unit vectors in R^N at the vertices of a regular simplex, so that
/// sum_i e_i^a e_i^b = (N+1)/N delta^ab - 1/N.
class PottsBasis {
 public:
  explicit PottsBasis(std::size_t ncomp);

  std::size_t ncomp() const noexcept { return ncomp_; }
  std::size_t state_count() const noexcept { return ncomp_ + 1; }
  std::span<const double> state(std::size_t a) const {
    return {vectors_.data() + a * ncomp_, ncomp_};
  }

  /// max over (a, b) of |e^a . e^b - ((N+1)/N delta^ab - 1/N)|
  double identity_residual() const;

 private:
  std::size_t ncomp_;
  std::vector<double> vectors_;
};

PottsBasis potts_basis(std::size_t ncomp);

/// Dense symmetric tensors of the quartic/cubic couplings built from a basis:
///   Q_ijk  = sum_a e_i e_j e_k
///   F_ijkl = sum_a e_i e_j e_k e_l
///   S_ijkl = (d_ij d_kl + d_ik d_jl + d_il d_jk) / 3
struct CouplingTensors {
  std::size_t ncomp = 0;
  std::vector<double> cubic;
  std::vector<double> quartic_f;
  std::vector<double> quartic_s;

  double q(std::size_t i, std::size_t j, std::size_t k) const {
    return cubic[(i * ncomp + j) * ncomp + k];
  }
  double f(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return quartic_f[((i * ncomp + j) * ncomp + k) * ncomp + l];
  }
  double s(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return quartic_s[((i * ncomp + j) * ncomp + k) * ncomp + l];
  }

  /// Largest deviation between any entry and its index permutations.
  double max_asymmetry() const;
};

/// Capacity error for N > 32 (each quartic tensor holds N^4 doubles).
CouplingTensors coupling_tensors(const PottsBasis& basis);

}  // namespace onphase::lattice

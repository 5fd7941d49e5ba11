#pragma once

// Conversions between PML, differential-privacy and mutual-information
// budgets for the linear Gaussian mechanism Y = C X + V.

#include "pmlkit/pml.hpp"

namespace pmlkit {

struct DpBudget {
  double epsilon_dp;
  double delta_dp;
  double zeta;  // adjacency radius |x - x'| <= zeta

  static DpBudget make(double epsilon_dp, double delta_dp, double zeta);
};

struct MiBudget {
  double epsilon_mi;

  static MiBudget make(double epsilon_mi);
};

/// Gaussian-mechanism privacy profile over the sensitivity-to-noise ratio r:
/// Phi(r/2 - eps/r) - e^eps Phi(-r/2 - eps/r).
double phi(double epsilon_dp, double r);

/// The ratio r with phi(epsilon_dp, r) = delta_dp, searched on [1e-12, 1e6].
double phi_inverse(double epsilon_dp, double delta_dp);

/// lambda_max(C^T Theta^{-1} C) <= (phi^{-1}(eps, delta) / zeta)^2.
bool dp_check(const Matrix& c, const SymMatrix& theta, const DpBudget& dp);

/// Smallest epsilon_dp for which an (epsilon, delta)-PML private linear
/// mechanism with prior sigma_xx is also (epsilon_dp, delta_dp)-DP on Adj^zeta.
double pml_to_dp(const PrivacyBudget& b, const SymMatrix& sigma_xx, double zeta, double delta_dp);

/// Smallest PML epsilon implied by (epsilon_dp, delta_dp)-DP at level delta.
double dp_to_pml(const DpBudget& dp, const SymMatrix& sigma_xx, int l, double delta);

/// I(X;Y) = 1/2 log det(I_m + Theta^{-1/2} C Sigma_XX C^T Theta^{-1/2}).
double mutual_information(const SymMatrix& sigma_xx, const Matrix& c, const SymMatrix& theta);
/// Same quantity via 1/2 (log det Sigma_XX + log det(Sigma_XX^{-1} + C^T Theta^{-1} C)).
double mutual_information_state_form(const SymMatrix& sigma_xx, const Matrix& c, const SymMatrix& theta);

double pml_to_mi(const PrivacyBudget& b);
double mi_to_pml(const MiBudget& mi, int l, int n, double delta);

/// -2 I(X;Y) >= n log kappa; equivalent to the exact PML privacy test.
bool mi_pml_equivalence(const SymMatrix& sigma_xx, const Matrix& c, const SymMatrix& theta, const PrivacyBudget& b);

}  // namespace pmlkit

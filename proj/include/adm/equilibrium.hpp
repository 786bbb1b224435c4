#pragma once

#include <iosfwd>
#include <vector>

#include "adm/demand.hpp"
#include "adm/meanfield.hpp"

namespace adm {

// Fixed-point residual Phi(x; u) = g(1 + (K-1)(p + (u-p)x)) - x. The explicit
// u argument overrides params.u so callers can sweep controls with one params
// object. Phi(0) >= 0 and Phi(1) <= 0 always, so a root exists in [0,1].
double phi(double x, double u, const ModelParams& params, const PoissonTable& table);

struct EquilibriumResult {
  double x_star = 0.0;
  double residual = 0.0;  // Phi(x_star)
  int iterations = 0;
  bool unique_certified = false;
};

// Bisection on [0,1] down to bracket width delta_x; requires the monotone
// regime u >= params.p_base (throws RegimeError otherwise). Phi is strictly
// decreasing there, so the root is unique.
EquilibriumResult solve_x_star(double u, const ModelParams& params,
                               const PoissonTable& table, double delta_x = 1e-10);

enum class UniquenessRegime { u_ge_p, contraction, inconclusive };

const char* to_string(UniquenessRegime regime);

// For u < p, L = (K-1)(p-u) * lambda * max_{a in A} F(floor(a)-1)/a^2 over the
// breakpoint set A = {a_min} union (integers in (a_min, a_max]), with
// a_min = 1+(K-1)u and a_max = 1+(K-1)p. L < 1 certifies contraction. For
// u >= p the certificate is unconditional (empty breakpoint set, L = 0).
struct UniquenessCertificate {
  UniquenessRegime regime = UniquenessRegime::u_ge_p;
  double lipschitz_constant = 0.0;
  std::vector<double> breakpoint_set;
};

UniquenessCertificate uniqueness_certificate(double u, const ModelParams& params,
                                             const PoissonTable& table);

// Sign-change scan of Phi on a uniform grid (grid_size >= 100 intervals),
// each bracket refined by bisection to width 1e-10, roots deduplicated at
// 1e-8. near_roots records grid points where |Phi| < 1e-6 without an adjacent
// sign change (tangency suspects).
struct FixedPointScan {
  std::vector<double> roots;
  std::vector<double> near_roots;
};

FixedPointScan scan_fixed_points(double u, const ModelParams& params,
                                 const PoissonTable& table, int grid_size);

// Columns: x_grid, phi.
void write_phi_scan_csv(double u, const ModelParams& params, const PoissonTable& table,
                        int grid_size, std::ostream& out);

}  // namespace adm

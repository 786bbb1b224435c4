#include "adm/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "fmt_util.hpp"

namespace adm {

double phi(double x, double u, const ModelParams& params, const PoissonTable& table) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("phi: x must be in [0, 1]");
  if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("phi: u must be in [0, 1]");
  const double q = params.p_base + (u - params.p_base) * x;
  const double a = 1.0 + (params.k_agents - 1) * q;
  return eval_g(a, table) - x;
}

EquilibriumResult solve_x_star(double u, const ModelParams& params,
                               const PoissonTable& table, double delta_x) {
  params.validate();
  if (!(u >= 0.0 && u <= 1.0))
    throw std::invalid_argument("solve_x_star: u must be in [0, 1]");
  if (u < params.p_base)
    throw RegimeError("solve_x_star: requires u >= p (monotone regime)");
  if (!(delta_x > 0.0))
    throw std::invalid_argument("solve_x_star: delta_x must be positive");

  double lo = 0.0, hi = 1.0;
  int iterations = 0;
  while (hi - lo > delta_x) {
    const double mid = 0.5 * (lo + hi);
    if (phi(mid, u, params, table) >= 0.0)
      lo = mid;
    else
      hi = mid;
    ++iterations;
  }
  EquilibriumResult r;
  r.x_star = 0.5 * (lo + hi);
  r.residual = phi(r.x_star, u, params, table);
  r.iterations = iterations;
  r.unique_certified = true;  // Phi is strictly decreasing for u >= p
  return r;
}

const char* to_string(UniquenessRegime regime) {
  switch (regime) {
    case UniquenessRegime::u_ge_p:
      return "u_ge_p";
    case UniquenessRegime::contraction:
      return "contraction";
    case UniquenessRegime::inconclusive:
      return "inconclusive";
  }
  return "?";
}

UniquenessCertificate uniqueness_certificate(double u, const ModelParams& params,
                                             const PoissonTable& table) {
  params.validate();
  if (!(u >= 0.0 && u <= 1.0))
    throw std::invalid_argument("uniqueness_certificate: u must be in [0, 1]");

  UniquenessCertificate cert;
  const double p = params.p_base;
  if (u >= p) {
    cert.regime = UniquenessRegime::u_ge_p;
    cert.lipschitz_constant = 0.0;
    return cert;
  }

  // Envelope of |Phi'| over a in [a_min, a_max]: F(floor(a)-1)/a^2 is largest
  // either at the left endpoint or just right of an integer, so checking the
  // breakpoints bounds the whole interval.
  const double a_min = 1.0 + (params.k_agents - 1) * u;
  const double a_max = 1.0 + (params.k_agents - 1) * p;
  cert.breakpoint_set.push_back(a_min);
  for (double m = std::floor(a_min) + 1.0; m <= a_max; m += 1.0)
    if (m > a_min) cert.breakpoint_set.push_back(m);

  double worst = 0.0;
  for (double a : cert.breakpoint_set) {
    const double f = table.cdf_at(static_cast<int>(std::floor(a)) - 1) / (a * a);
    worst = std::max(worst, f);
  }
  cert.lipschitz_constant = (params.k_agents - 1) * (p - u) * params.lambda * worst;
  cert.regime = cert.lipschitz_constant < 1.0 ? UniquenessRegime::contraction
                                              : UniquenessRegime::inconclusive;
  return cert;
}

FixedPointScan scan_fixed_points(double u, const ModelParams& params,
                                 const PoissonTable& table, int grid_size) {
  params.validate();
  if (!(u >= 0.0 && u <= 1.0))
    throw std::invalid_argument("scan_fixed_points: u must be in [0, 1]");
  if (grid_size < 100)
    throw std::invalid_argument("scan_fixed_points: grid_size must be >= 100");

  const int n = grid_size;
  std::vector<double> xs(static_cast<std::size_t>(n) + 1);
  std::vector<double> fs(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    xs[static_cast<std::size_t>(i)] = static_cast<double>(i) / n;
    fs[static_cast<std::size_t>(i)] = phi(xs[static_cast<std::size_t>(i)], u, params, table);
  }

  auto refine = [&](double lo, double hi, double f_lo) {
    while (hi - lo > 1e-10) {
      const double mid = 0.5 * (lo + hi);
      const double fm = phi(mid, u, params, table);
      if ((fm > 0.0) == (f_lo > 0.0))
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  };

  std::vector<double> raw;
  for (int i = 0; i <= n; ++i)
    if (fs[static_cast<std::size_t>(i)] == 0.0) raw.push_back(xs[static_cast<std::size_t>(i)]);
  for (int i = 0; i < n; ++i) {
    const double fl = fs[static_cast<std::size_t>(i)];
    const double fr = fs[static_cast<std::size_t>(i) + 1];
    if (fl == 0.0 || fr == 0.0) continue;  // already recorded at the node
    if ((fl > 0.0) != (fr > 0.0))
      raw.push_back(refine(xs[static_cast<std::size_t>(i)], xs[static_cast<std::size_t>(i) + 1], fl));
  }
  std::sort(raw.begin(), raw.end());

  FixedPointScan out;
  for (double r : raw)
    if (out.roots.empty() || r - out.roots.back() > 1e-8) out.roots.push_back(r);

  for (int i = 0; i <= n; ++i) {
    const double f = fs[static_cast<std::size_t>(i)];
    if (f == 0.0 || !(std::fabs(f) < 1e-6)) continue;
    const bool change_left =
        i > 0 && (fs[static_cast<std::size_t>(i) - 1] > 0.0) != (f > 0.0);
    const bool change_right =
        i < n && (f > 0.0) != (fs[static_cast<std::size_t>(i) + 1] > 0.0);
    if (change_left || change_right) continue;
    const bool local_min =
        (i == 0 || std::fabs(f) <= std::fabs(fs[static_cast<std::size_t>(i) - 1])) &&
        (i == n || std::fabs(f) <= std::fabs(fs[static_cast<std::size_t>(i) + 1]));
    if (local_min) out.near_roots.push_back(xs[static_cast<std::size_t>(i)]);
  }
  return out;
}

void write_phi_scan_csv(double u, const ModelParams& params, const PoissonTable& table,
                        int grid_size, std::ostream& out) {
  params.validate();
  if (grid_size < 100)
    throw std::invalid_argument("write_phi_scan_csv: grid_size must be >= 100");
  out << "x_grid,phi\n";
  for (int i = 0; i <= grid_size; ++i) {
    const double x = static_cast<double>(i) / grid_size;
    out << detail::fmt_double(x) << ',' << detail::fmt_double(phi(x, u, params, table))
        << '\n';
  }
}

}  // namespace adm

#pragma once

#include <vector>

#include "adm/errors.hpp"

namespace adm {

// Tabulated Poisson(lambda) distribution. pmf[k] and cdf[k] = P(D <= k) for
// k = 0..k_max, with 1 - cdf[k_max] <= 1e-12.
struct PoissonTable {
  double lambda = 0.0;
  std::vector<double> pmf;
  std::vector<double> cdf;
  int k_max = 0;

  // F(k) with the convention F(k) = 0 for k < 0. Indices past k_max clamp to
  // cdf[k_max]; the neglected tail is below 1e-12 by construction.
  double cdf_at(int k) const {
    if (k < 0) return 0.0;
    return cdf[static_cast<std::size_t>(k < k_max ? k : k_max)];
  }
};

// Builds the table by the multiplicative recurrence pmf[k] = pmf[k-1]*lambda/k
// starting from pmf[0] = exp(-lambda). For lambda large enough that exp(-lambda)
// underflows (> 700) the same recurrence is anchored at the mode instead.
// k_max = max(k_cap, smallest m with tail <= 1e-12). Throws std::invalid_argument
// for lambda <= 0 or k_cap < 0.
PoissonTable build_poisson_table(double lambda, int k_cap);

// g(a) = E[min(1, D/a)] in closed form:
//   g(a) = 1 - F(k0-1) + (lambda/a) F(k0-2),  k0 = ceil(a).
// Throws std::domain_error for a <= 0, TableTooSmallError if ceil(a) > k_max.
double eval_g(double a, const PoissonTable& table);

// One-sided (right) derivative g'(a) = -(lambda/a^2) F(floor(a)-1). Exact on
// every open interval (n, n+1); at integer a it returns the right-hand value.
// Throws std::domain_error for a <= 0.
double eval_g_prime(double a, const PoissonTable& table);

// Brute-force oracle: sum_k pmf[k]*min(1, k/a) truncated once the neglected
// tail is <= 1e-13. Independent of eval_g's closed form on purpose; intended
// for moderate lambda (it starts its own recurrence at exp(-lambda)).
double g_oracle(double a, double lambda);

}  // namespace adm

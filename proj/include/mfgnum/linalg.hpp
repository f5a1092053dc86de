#pragma once

#include <span>
#include <vector>

namespace mfgnum {

/**
 * Solves the cyclic tridiagonal system
 *   lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i],
 * indices taken modulo n (n >= 3). Thomas sweep plus a Sherman-Morrison
 * correction for the two corner entries.
 */
std::vector<double> solve_cyclic_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                             std::span<const double> upper, std::span<const double> rhs);

/// Non-cyclic variant; lower[0] and upper[n-1] are ignored.
std::vector<double> solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                      std::span<const double> upper, std::span<const double> rhs);

}  // namespace mfgnum

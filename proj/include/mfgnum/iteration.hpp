#pragma once

#include <string>
#include <vector>

namespace mfgnum {

/// delta(k) in the damped update x~ <- delta(k) x~ + (1 - delta(k)) x.
struct DampingSchedule {
  enum class Kind { constant, fictitious_play };
  Kind kind = Kind::constant;
  double value = 0.0;

  static DampingSchedule constant(double omega) { return {Kind::constant, omega}; }
  /// delta(k) = k/(k+1): the running average of all best responses.
  static DampingSchedule fictitious() { return {Kind::fictitious_play, 0.0}; }

  [[nodiscard]] double operator()(int k) const {
    return kind == Kind::constant ? value : static_cast<double>(k) / (k + 1);
  }
  [[nodiscard]] std::string describe() const;
};

/// Any iterate difference above this marks the run as divergent.
inline constexpr double kDivergenceThreshold = 1e6;

/// Per-iteration record kept by every fixed-point style solver.
struct IterationRecord {
  int k = 0;
  double delta_a = 0.0;  ///< first tracked quantity (z, U, ...)
  double delta_b = 0.0;  ///< second tracked quantity (r, M, ...)
  double residual = 0.0;
};

struct IterationHistory {
  std::vector<IterationRecord> records;
  bool converged = false;
  bool diverged = false;

  [[nodiscard]] int iterations() const { return static_cast<int>(records.size()); }
};

inline std::string DampingSchedule::describe() const {
  if (kind == Kind::fictitious_play) return "fictitious";
  return "constant(" + std::to_string(value) + ")";
}

}  // namespace mfgnum

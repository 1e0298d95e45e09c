#pragma once

#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>

namespace ncrep {

/// Base thresholds. Each is multiplied by the global scale at the point of use,
/// so NCREP_TOL=10 loosens every check by one decade.
namespace tolerance {
inline constexpr double pd = 1e-10;          // min eigenvalue / spectral norm
inline constexpr double rank = 1e-9;         // singular value / largest singular value
inline constexpr double dependence = 1e-9;   // Gram-Schmidt discard, relative to largest input norm
inline constexpr double absolute = 1e-10;
inline constexpr double hermitian = 1e-10;
inline constexpr double membership = 1e-8;   // contains(): residual / max(1, |X|)
}  // namespace tolerance

struct ToleranceConfig {
  double scale = 1.0;
};

/// Parses a tolerance scale as accepted by NCREP_TOL: a finite positive number.
inline std::optional<double> parse_tolerance_scale(const char* text) {
  if (text == nullptr || *text == '\0') return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(text, &end);
  if (end == text || *end != '\0' || !std::isfinite(v) || v <= 0.0) return std::nullopt;
  return v;
}

inline ToleranceConfig& tolerance_config() {
  static ToleranceConfig cfg = [] {
    ToleranceConfig c;
    if (auto v = parse_tolerance_scale(std::getenv("NCREP_TOL"))) c.scale = *v;
    return c;
  }();
  return cfg;
}

inline double tol(double base) { return base * tolerance_config().scale; }

}  // namespace ncrep

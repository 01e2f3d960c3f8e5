#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>

#include "netinfer/errors.hpp"

namespace netinfer {

enum class FamilyKind { bernoulli, poisson, gaussian };

/// Exponential-family law of a response given its linear predictor.
struct ResponseFamily {
  FamilyKind kind = FamilyKind::bernoulli;
  /// Known scale; fixed at 1 unless Gaussian.
  double psi = 1.0;

  static ResponseFamily bernoulli() { return {FamilyKind::bernoulli, 1.0}; }
  static ResponseFamily poisson() { return {FamilyKind::poisson, 1.0}; }
  static ResponseFamily gaussian(double psi) {
    if (!(psi > 0.0) || !std::isfinite(psi)) {
      throw ValidationError("Gaussian scale psi must be positive and finite, got " + std::to_string(psi));
    }
    return {FamilyKind::gaussian, psi};
  }

  void validate() const {
    if (!(psi > 0.0) || !std::isfinite(psi)) throw ValidationError("scale psi must be positive");
    if (kind != FamilyKind::gaussian && psi != 1.0) {
      throw ValidationError("scale psi must be 1 for Bernoulli and Poisson responses");
    }
  }

  /// Whether y lies in the support of the family.
  [[nodiscard]] bool in_support(double y) const noexcept {
    switch (kind) {
      case FamilyKind::bernoulli: return y == 0.0 || y == 1.0;
      case FamilyKind::poisson: return y >= 0.0 && std::floor(y) == y && std::isfinite(y);
      case FamilyKind::gaussian: return std::isfinite(y);
    }
    return false;
  }

  friend bool operator==(const ResponseFamily&, const ResponseFamily&) = default;
};

inline std::string_view family_name(FamilyKind k) {
  switch (k) {
    case FamilyKind::bernoulli: return "bernoulli";
    case FamilyKind::poisson: return "poisson";
    case FamilyKind::gaussian: return "gaussian";
  }
  return "unknown";
}

inline FamilyKind parse_family(std::string_view s) {
  if (s == "bernoulli") return FamilyKind::bernoulli;
  if (s == "poisson") return FamilyKind::poisson;
  if (s == "gaussian") return FamilyKind::gaussian;
  throw ValidationError("unknown response family '" + std::string(s) + "' (expected bernoulli, poisson or gaussian)");
}

/// Largest linear predictor accepted for Poisson responses: log(DBL_MAX)/2.
inline const double kPoissonEtaCap = std::log(std::numeric_limits<double>::max()) / 2.0;

/// log(1 + exp(eta)) without overflow.
inline double log1p_exp(double eta) noexcept {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

/// Inverse logit without overflow.
inline double logistic(double eta) noexcept {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

inline void check_poisson_eta(double eta) {
  if (eta > kPoissonEtaCap) {
    throw NumericalError("Poisson linear predictor " + std::to_string(eta) + " exceeds cap " +
                         std::to_string(kPoissonEtaCap));
  }
}

/// Cumulant function b(eta).
inline double cumulant(const ResponseFamily& f, double eta) {
  switch (f.kind) {
    case FamilyKind::bernoulli: return log1p_exp(eta);
    case FamilyKind::poisson: check_poisson_eta(eta); return std::exp(eta);
    case FamilyKind::gaussian: return 0.5 * eta * eta;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

/// Conditional mean b'(eta).
inline double mean(const ResponseFamily& f, double eta) {
  switch (f.kind) {
    case FamilyKind::bernoulli: return logistic(eta);
    case FamilyKind::poisson: check_poisson_eta(eta); return std::exp(eta);
    case FamilyKind::gaussian: return eta;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

/// b''(eta); the conditional variance is psi * b''(eta).
inline double cumulant_curvature(const ResponseFamily& f, double eta) {
  switch (f.kind) {
    case FamilyKind::bernoulli: {
      const double p = logistic(eta);
      return p * (1.0 - p);
    }
    case FamilyKind::poisson: check_poisson_eta(eta); return std::exp(eta);
    case FamilyKind::gaussian: return 1.0;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

/// log a(y): base density of the family.
inline double log_base_measure(const ResponseFamily& f, double y) {
  switch (f.kind) {
    case FamilyKind::bernoulli: return 0.0;
    case FamilyKind::poisson: return -std::lgamma(y + 1.0);
    case FamilyKind::gaussian:
      return -0.5 * std::log(2.0 * std::numbers::pi * f.psi) - y * y / (2.0 * f.psi);
  }
  return 0.0;
}

/// log f(y | eta) = log a(y) + (eta*y - b(eta)) / psi.
inline double log_density(const ResponseFamily& f, double y, double eta) {
  return log_base_measure(f, y) + (eta * y - cumulant(f, eta)) / f.psi;
}

}  // namespace netinfer

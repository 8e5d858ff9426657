#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>

namespace cavlab {

enum class ProfileTag { Indicator, Bump };

/// Base potential beta: bounded, supported in the unit interval, with
/// positive mass. Two built-ins bracket the nonsmooth/smooth extremes:
///   indicator: beta = 1 on (0, 1]   (open at 0 so beta(0) = 0)
///   bump:      beta(t) = 6 t (1 - t) on [0, 1], C^1 and mass-normalized
struct PerturbationProfile {
  ProfileTag tag = ProfileTag::Indicator;

  double bound() const { return tag == ProfileTag::Indicator ? 1.0 : 1.5; }  // sup beta
  double mass() const { return 1.0; }                                        // integral of beta

  double beta(double t) const {
    if (tag == ProfileTag::Indicator) return (t > 0.0 && t <= 1.0) ? 1.0 : 0.0;
    return (t > 0.0 && t < 1.0) ? 6.0 * t * (1.0 - t) : 0.0;
  }

  /// Primitive of beta, clamped: 0 for t <= 0, mass() for t >= 1.
  double primitive(double t) const {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return mass();
    if (tag == ProfileTag::Indicator) return t;
    return t * t * (3.0 - 2.0 * t);
  }

  std::string name() const { return tag == ProfileTag::Indicator ? "indicator" : "bump"; }
};

inline PerturbationProfile profile_from_name(const std::string& name) {
  if (name == "indicator") return PerturbationProfile{ProfileTag::Indicator};
  if (name == "bump") return PerturbationProfile{ProfileTag::Bump};
  throw std::invalid_argument("unknown profile: " + name);
}

/// beta_eps(t) = beta(t / eps) / eps, supported in (0, eps].
inline double beta_eps(const PerturbationProfile& p, double eps, double t) {
  if (!(eps > 0.0)) throw std::invalid_argument("beta_eps: eps must be positive");
  return p.beta(t / eps) / eps;
}

/// B_eps(t) = integral of beta_eps from 0 to t; equals the full mass for
/// t >= eps and vanishes for t <= 0. Closed form, no quadrature.
inline double bigB_eps(const PerturbationProfile& p, double eps, double t) {
  if (!(eps > 0.0)) throw std::invalid_argument("bigB_eps: eps must be positive");
  return p.primitive(t / eps);
}

} // namespace cavlab

#pragma once

#include <functional>
#include <string>

#include "sihg/block_vector.hpp"

namespace sihg {

// prox_h^eta(z) = argmin_u h(u) + (1/(2 eta)) |u - z|^2.
// All three closed forms reject non-finite operands instead of propagating NaN.
Vector prox_zero(const Vector& z, double eta);
Vector prox_quadratic(const Vector& z, double eta, double lambda);
Vector prox_box(const Vector& z, double eta, double radius);

// Convex piece h (the f term or one g_i). Beyond the prox, each kind knows how
// to pick the subgradient gamma in dh(z) closest to a target vector; that
// selection is what the saddle residual and the MVI checks minimize over.
struct Regularizer {
  enum class Kind { Zero, Quadratic, Box, Custom };

  Kind kind = Kind::Zero;
  double param = 0.0;  // Quadratic: lambda >= 0. Box: radius > 0.

  // (z, eta) -> prox_h^eta(z). Always set.
  std::function<Vector(const Vector&, double)> prox;

  // Custom only: (z, target) -> argmin_{gamma in dh(z)} |gamma - target|.
  // Zero/Quadratic/Box have closed forms and leave this empty.
  std::function<Vector(const Vector&, const Vector&)> witness;

  static Regularizer zero();
  static Regularizer quadratic(double lambda);
  static Regularizer box(double radius);
  static Regularizer custom(std::function<Vector(const Vector&, double)> prox,
                            std::function<Vector(const Vector&, const Vector&)> witness);

  // Subgradient of h at z closest to target. For Box, z must lie in the box
  // (up to a tiny overshoot tolerance); outside, dh(z) is empty and this throws.
  Vector closest_subgradient(const Vector& z, const Vector& target) const;

  // True when z is in the domain of dh (always, except strictly outside a box).
  bool subdifferentiable_at(const Vector& z) const;

  std::string describe() const;
};

}  // namespace sihg

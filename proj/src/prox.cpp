#include "sihg/prox.hpp"

#include <cmath>
#include <stdexcept>

namespace sihg {

namespace {

// Boundary detection slack for box subdifferentials. Clamps produce exact
// +-radius, so this only forgives accumulated round-off from callers.
constexpr double kBoxSlack = 1e-12;

void require_finite(const Vector& z, const char* who) {
  if (!z.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite operand");
}

void require_finite(double x, const char* who) {
  if (!std::isfinite(x)) throw std::invalid_argument(std::string(who) + ": non-finite operand");
}

}  // namespace

Vector prox_zero(const Vector& z, double eta) {
  require_finite(z, "prox_zero");
  require_finite(eta, "prox_zero");
  if (eta <= 0.0) throw std::invalid_argument("prox_zero: eta must be positive");
  return z;
}

Vector prox_quadratic(const Vector& z, double eta, double lambda) {
  require_finite(z, "prox_quadratic");
  require_finite(eta, "prox_quadratic");
  require_finite(lambda, "prox_quadratic");
  if (eta <= 0.0) throw std::invalid_argument("prox_quadratic: eta must be positive");
  if (lambda < 0.0) throw std::invalid_argument("prox_quadratic: lambda must be nonnegative");
  return z / (1.0 + eta * lambda);
}

Vector prox_box(const Vector& z, double eta, double radius) {
  require_finite(z, "prox_box");
  require_finite(eta, "prox_box");
  require_finite(radius, "prox_box");
  if (eta <= 0.0) throw std::invalid_argument("prox_box: eta must be positive");
  if (radius <= 0.0) throw std::invalid_argument("prox_box: radius must be positive");
  return z.cwiseMax(-radius).cwiseMin(radius);
}

Regularizer Regularizer::zero() {
  Regularizer r;
  r.kind = Kind::Zero;
  r.prox = [](const Vector& z, double eta) { return prox_zero(z, eta); };
  return r;
}

Regularizer Regularizer::quadratic(double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("Regularizer::quadratic: lambda must be >= 0");
  Regularizer r;
  r.kind = Kind::Quadratic;
  r.param = lambda;
  r.prox = [lambda](const Vector& z, double eta) { return prox_quadratic(z, eta, lambda); };
  return r;
}

Regularizer Regularizer::box(double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("Regularizer::box: radius must be > 0");
  Regularizer r;
  r.kind = Kind::Box;
  r.param = radius;
  r.prox = [radius](const Vector& z, double eta) { return prox_box(z, eta, radius); };
  return r;
}

Regularizer Regularizer::custom(std::function<Vector(const Vector&, double)> prox,
                                std::function<Vector(const Vector&, const Vector&)> witness) {
  if (!prox) throw std::invalid_argument("Regularizer::custom: prox is required");
  Regularizer r;
  r.kind = Kind::Custom;
  r.prox = std::move(prox);
  r.witness = std::move(witness);
  return r;
}

bool Regularizer::subdifferentiable_at(const Vector& z) const {
  if (kind != Kind::Box) return true;
  return (z.cwiseAbs().maxCoeff() <= param * (1.0 + kBoxSlack) + kBoxSlack);
}

Vector Regularizer::closest_subgradient(const Vector& z, const Vector& target) const {
  switch (kind) {
    case Kind::Zero:
      return Vector::Zero(z.size());
    case Kind::Quadratic:
      return param * z;
    case Kind::Box: {
      if (!subdifferentiable_at(z))
        throw std::domain_error("Regularizer: point outside box, subdifferential empty");
      // Normal cone of the box, coordinate-wise: {0} inside, a half-line on
      // each face. The closest element is the clamp of target onto the cone.
      Vector gamma(z.size());
      const double hi = param * (1.0 - kBoxSlack);
      for (Index j = 0; j < z.size(); ++j) {
        if (z[j] >= hi) {
          gamma[j] = std::max(target[j], 0.0);
        } else if (z[j] <= -hi) {
          gamma[j] = std::min(target[j], 0.0);
        } else {
          gamma[j] = 0.0;
        }
      }
      return gamma;
    }
    case Kind::Custom:
      if (!witness)
        throw std::invalid_argument(
            "Regularizer: custom term has no subgradient witness; residual undefined");
      return witness(z, target);
  }
  throw std::logic_error("Regularizer: unknown kind");
}

std::string Regularizer::describe() const {
  switch (kind) {
    case Kind::Zero: return "zero";
    case Kind::Quadratic: return "quadratic(" + std::to_string(param) + ")";
    case Kind::Box: return "box(" + std::to_string(param) + ")";
    case Kind::Custom: return "custom";
  }
  return "?";
}

}  // namespace sihg

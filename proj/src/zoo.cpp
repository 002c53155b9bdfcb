#include "sihg/zoo.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "sihg/analysis.hpp"

namespace sihg {

namespace {

// Largest singular value by power iteration on A^T A, relative tolerance 1e-10.
double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Vector v = Vector::Ones(a.cols()).normalized();
  double value = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Vector next = a.transpose() * (a * v);
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;  // A v in the null space; A == 0 for the ones start
    next /= norm;
    const double estimate = std::sqrt(norm);
    if (std::abs(estimate - value) <= 1e-10 * std::max(1.0, estimate)) return estimate;
    value = estimate;
    v = next;
  }
  return value;
}

}  // namespace

Regularizer TermSpec::build() const {
  switch (kind) {
    case Kind::Zero: return Regularizer::zero();
    case Kind::Quadratic: return Regularizer::quadratic(param);
    case Kind::Box: return Regularizer::box(param);
  }
  throw std::logic_error("TermSpec: unknown kind");
}

MinimaxProblem make_bilinear(const Matrix& a, const TermSpec& f_term, const TermSpec& g_term) {
  return make_block_bilinear({a}, f_term, g_term);
}

MinimaxProblem make_block_bilinear(const std::vector<Matrix>& blocks, const TermSpec& f_term,
                                   const TermSpec& g_term) {
  if (blocks.empty()) throw std::invalid_argument("make_block_bilinear: need at least one block");
  MinimaxProblem p;
  p.n = static_cast<int>(blocks.size());
  p.dim_w = blocks.front().cols();
  double norm_sq_sum = 0.0;
  for (const Matrix& a : blocks) {
    if (a.cols() != p.dim_w)
      throw std::invalid_argument("make_block_bilinear: inconsistent block widths");
    p.block_dims.push_back(a.rows());
    const double s = spectral_norm(a);
    norm_sq_sum += s * s;
  }
  p.f = f_term.build();
  p.g.assign(static_cast<std::size_t>(p.n), g_term.build());

  const std::vector<Matrix> a = blocks;
  p.grad_w_block = [a](int i, const Vector&, const Vector& di) {
    return Vector(a[static_cast<std::size_t>(i)].transpose() * di);
  };
  p.grad_delta_block = [a](int i, const Vector& w, const Vector&) {
    return Vector(a[static_cast<std::size_t>(i)] * w);
  };
  p.value_block = [a](int i, const Vector& w, const Vector& di) {
    return di.dot(a[static_cast<std::size_t>(i)] * w);
  };

  // The stacked coupling gradient in w is A^T with A the vertical stack, so
  // L12 is the stack's spectral norm; |stack|^2 <= sum of block norms^2 gives
  // a cheap exact-enough constant only for n = 1, so form the stack directly.
  p.lipschitz.L11 = 0.0;
  p.lipschitz.L22 = 0.0;
  if (p.n == 1) {
    p.lipschitz.L12 = std::sqrt(norm_sq_sum);
  } else {
    Index rows = 0;
    for (const Matrix& m : blocks) rows += m.rows();
    Matrix stack(rows, p.dim_w);
    Index at = 0;
    for (const Matrix& m : blocks) {
      stack.middleRows(at, m.rows()) = m;
      at += m.rows();
    }
    p.lipschitz.L12 = spectral_norm(stack);
  }

  // Zero or quadratic terms keep the origin stationary; a box contains it.
  p.known_solution = SaddlePoint{p.zero_w(), p.zero_delta()};
  return p;
}

MinimaxProblem make_quadratic_game(double a, double b, double c, Index dim) {
  return make_block_quadratic_game(a, b, c, 1, dim);
}

MinimaxProblem make_block_quadratic_game(double a, double b, double c, int n, Index block_dim) {
  if (n <= 0 || block_dim <= 0)
    throw std::invalid_argument("make_block_quadratic_game: n and block_dim must be positive");
  MinimaxProblem p;
  p.n = n;
  p.dim_w = static_cast<Index>(n) * block_dim;
  p.block_dims.assign(static_cast<std::size_t>(n), block_dim);
  p.f = Regularizer::zero();
  p.g.assign(static_cast<std::size_t>(n), Regularizer::zero());

  const double nd = static_cast<double>(n);
  p.grad_w_block = [a, b, block_dim, nd](int i, const Vector& w, const Vector& di) {
    Vector out = (a / nd) * w;
    out.segment(static_cast<Index>(i) * block_dim, block_dim) += b * di;
    return out;
  };
  p.grad_delta_block = [b, c, block_dim](int i, const Vector& w, const Vector& di) {
    return Vector(b * w.segment(static_cast<Index>(i) * block_dim, block_dim) - c * di);
  };
  p.value_block = [a, b, c, block_dim, nd](int i, const Vector& w, const Vector& di) {
    return 0.5 * (a / nd) * w.squaredNorm() +
           b * di.dot(w.segment(static_cast<Index>(i) * block_dim, block_dim)) -
           0.5 * c * di.squaredNorm();
  };

  p.lipschitz.L11 = std::abs(a);
  p.lipschitz.L12 = std::abs(b);
  p.lipschitz.L22 = std::abs(c);
  p.known_solution = SaddlePoint{p.zero_w(), p.zero_delta()};
  return p;
}

MinimaxProblem make_toy_at(const ToyDataset& data, const MlpShape& net, double eps, int n) {
  if (n <= 0) throw std::invalid_argument("make_toy_at: n must be positive");
  if (!(eps > 0.0)) throw std::invalid_argument("make_toy_at: eps must be positive");
  if (data.size() % n != 0)
    throw std::invalid_argument("make_toy_at: dataset size must split into n equal batches");
  const Index batch = data.size() / n;
  const Index in_dim = data.inputs.rows();

  MinimaxProblem p;
  p.n = n;
  p.dim_w = net.param_count();
  p.block_dims.assign(static_cast<std::size_t>(n), in_dim * batch);
  p.f = Regularizer::zero();
  p.g.assign(static_cast<std::size_t>(n), Regularizer::box(eps));

  std::vector<Matrix> xs;
  std::vector<std::vector<int>> ys;
  for (int i = 0; i < n; ++i) {
    xs.push_back(data.inputs.middleCols(static_cast<Index>(i) * batch, batch));
    ys.emplace_back(data.labels.begin() + static_cast<std::ptrdiff_t>(i) * batch,
                    data.labels.begin() + static_cast<std::ptrdiff_t>(i + 1) * batch);
  }

  const double scale = 1.0 / static_cast<double>(n);
  auto perturbed = [xs, in_dim, batch](int i, const Vector& di) {
    return Matrix(xs[static_cast<std::size_t>(i)] +
                  Eigen::Map<const Matrix>(di.data(), in_dim, batch));
  };
  p.grad_w_block = [net, xs, ys, perturbed, scale](int i, const Vector& w, const Vector& di) {
    return Vector(scale * mlp_loss_and_grads(net, w, perturbed(i, di),
                                             ys[static_cast<std::size_t>(i)])
                              .grad_params);
  };
  p.grad_delta_block = [net, xs, ys, perturbed, scale](int i, const Vector& w, const Vector& di) {
    const Matrix g =
        mlp_loss_and_grads(net, w, perturbed(i, di), ys[static_cast<std::size_t>(i)]).grad_inputs;
    return Vector(scale * Eigen::Map<const Vector>(g.data(), g.size()));
  };
  p.value_block = [net, xs, ys, perturbed, scale](int i, const Vector& w, const Vector& di) {
    return scale * mlp_loss(net, w, perturbed(i, di), ys[static_cast<std::size_t>(i)]);
  };

  // Sampled estimates over unit-scale weights and in-box perturbations; the
  // network is smooth but nothing here is a certified global bound.
  MviDomain domain;
  const Index total = p.dim_w + p.zero_delta().flat().size();
  domain.lo = Vector::Constant(total, -eps);
  domain.hi = Vector::Constant(total, eps);
  domain.lo.head(p.dim_w).setConstant(-1.0);
  domain.hi.head(p.dim_w).setConstant(1.0);
  p.lipschitz = estimate_lipschitz(p, domain, 40, Rng(7));
  return p;
}

double quadratic_game_min_rho(double a, double b, double c) {
  // Margin ratio along the direction (cos t, sin t); scale invariance reduces
  // every dimension to this sweep. rho* = sup 2 (-(a x^2 + c y^2)) / |F|^2.
  auto ratio = [&](double t) {
    const double x = std::cos(t), y = std::sin(t);
    const double inner = a * x * x + c * y * y;
    const double fw = a * x + b * y;
    const double fd = c * y - b * x;
    const double energy = fw * fw + fd * fd;
    if (energy <= 1e-300) return (inner < 0.0) ? std::numeric_limits<double>::infinity() : 0.0;
    return std::max(0.0, -2.0 * inner / energy);
  };

  const int coarse = 2'000'000;
  double best = 0.0, best_t = 0.0;
  for (int j = 0; j < coarse; ++j) {
    const double t = kPi * j / coarse;  // ratio has period pi
    const double r = ratio(t);
    if (r > best) {
      best = r;
      best_t = t;
    }
  }
  // Ternary refine around the best cell.
  double lo = best_t - kPi / coarse, hi = best_t + kPi / coarse;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (ratio(m1) < ratio(m2))
      lo = m1;
    else
      hi = m2;
  }
  return std::max(best, ratio(0.5 * (lo + hi)));
}

}  // namespace sihg

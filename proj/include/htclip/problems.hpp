#pragma once

#include "htclip/hard_instance.hpp"
#include "htclip/types.hpp"

#include <memory>
#include <optional>
#include <variant>

namespace htclip {

struct CompositeObjective;

/// f(x) = sum_i M_i |x_i - y_i|
struct AbsSum {
  Vector M;
  Vector y;
};

/// f(x) = G ||x - y||
struct EuclidNorm {
  double G = 1.0;
  Vector y;
};

/// f(x) = <c, x>
struct Linear {
  Vector c;
};

/// Expected loss of a hard instance (piecewise linear for cvx, linear for str).
struct HardLoss {
  std::shared_ptr<const HardInstance> instance;
};

/// f(x) = F_source(x) - (mu/2) ||x - y_ref||^2
struct Reduced {
  std::shared_ptr<const CompositeObjective> source;
  double mu = 0.0;
  Vector y_ref;
};

using FKind = std::variant<AbsSum, EuclidNorm, Linear, HardLoss, Reduced>;

struct ZeroReg {};

/// r(x) = (mu/2) ||x - center||^2
struct QuadReg {
  double mu = 0.0;
  Vector center;
};

using RKind = std::variant<ZeroReg, QuadReg>;

struct AllSpace {
  Index d = 0;
};

struct Ball {
  Vector center;
  double radius = 1.0;
};

using Domain = std::variant<AllSpace, Ball>;

struct Optimum {
  Vector x_star;
  double F_star = 0.0;
};

struct CompositeObjective {
  FKind f;
  RKind r;
  Domain domain;
  double lipschitz_G = 0.0;
  double mu = 0.0;
  std::optional<Optimum> optimum;

  Index dim() const;
};

/// Builds an objective, filling G, mu and the optimum whenever they have a closed form.
CompositeObjective make_objective(FKind f, RKind r, Domain domain);

Index dimension(const Domain& domain);
bool in_domain(const Domain& domain, const Vector& x, double tol = 1e-12);
double modulus(const RKind& r);

double eval_f(const CompositeObjective& obj, const Vector& x);
double eval_r(const RKind& r, const Vector& x);
double eval_F(const CompositeObjective& obj, const Vector& x);

/// Element of the subdifferential of f, with sgn(0) = 0 at every kink.
Vector subgrad_f(const CompositeObjective& obj, const Vector& x);

Vector project(const Domain& domain, const Vector& x);

/// argmin over the domain of r(x) + <g, x> + ||x - x_t||^2 / (2 eta).
Vector prox_step(const RKind& r, const Domain& domain, const Vector& x_t, const Vector& g, double eta);

/// Same as prox_step plus the anchor (eta_t / eta_next - 1) ||x - x_1||^2 / (2 eta_t).
Vector stabilized_prox_step(const RKind& r, const Domain& domain, const Vector& x_t, const Vector& x_1,
                            const Vector& g, double eta_t, double eta_next);

/// Splits a mu-strongly convex objective into f - (mu/2)||x - y_ref||^2 plus the quadratic.
CompositeObjective reduce_strongly_convex(std::shared_ptr<const CompositeObjective> source, double mu,
                                          const Vector& y_ref);

}  // namespace htclip

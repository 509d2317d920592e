#include "htclip/problems.hpp"

#include <cmath>

namespace htclip {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_dim(const CompositeObjective& obj, const Vector& x) {
  if (x.size() != obj.dim()) throw ContractViolation("dimension mismatch");
}

Vector grad_r(const RKind& r, const Vector& x) {
  if (const auto* q = std::get_if<QuadReg>(&r)) return q->mu * (x - q->center);
  return Vector::Zero(x.size());
}

double hard_loss(const HardInstance& h, const Vector& x) {
  if (h.kind == HardKind::str) return -h.mu * x.dot(h.x_star);
  double total = 0.0;
  for (Index i = 0; i < h.d; ++i) {
    const double up = 0.5 * (1.0 + h.v[i] * h.theta[i]);
    const double down = 0.5 * (1.0 - h.v[i] * h.theta[i]);
    total += h.M[i] * h.q[i] * (up * std::abs(x[i] - h.y[i]) + down * std::abs(x[i] + h.y[i]));
  }
  return total;
}

Vector hard_loss_grad(const HardInstance& h, const Vector& x) {
  if (h.kind == HardKind::str) return -h.mu * h.x_star;
  Vector g(h.d);
  for (Index i = 0; i < h.d; ++i) {
    const double up = 0.5 * (1.0 + h.v[i] * h.theta[i]);
    const double down = 0.5 * (1.0 - h.v[i] * h.theta[i]);
    g[i] = h.M[i] * h.q[i] * (up * sgn(x[i] - h.y[i]) + down * sgn(x[i] + h.y[i]));
  }
  return g;
}

// Minimizer of the isotropic quadratic collected from the prox terms, then projected.
Vector prox_combined(const RKind& r, const Domain& domain, const Vector& x_t, const Vector& g, double eta,
                     double anchor_weight, const Vector* anchor) {
  Vector num = x_t / eta - g;
  double den = 1.0 / eta;
  if (const auto* q = std::get_if<QuadReg>(&r)) {
    num += q->mu * q->center;
    den += q->mu;
  }
  if (anchor_weight > 0.0) {
    num += anchor_weight * *anchor;
    den += anchor_weight;
  }
  return project(domain, num / den);
}

std::optional<Optimum> closed_form_optimum(const CompositeObjective& obj) {
  auto at = [&](const Vector& x) -> std::optional<Optimum> {
    if (!in_domain(obj.domain, x)) return std::nullopt;
    return Optimum{x, eval_F(obj, x)};
  };
  auto centered_on = [&](const Vector& y) {
    if (std::holds_alternative<ZeroReg>(obj.r)) return true;
    const auto& q = std::get<QuadReg>(obj.r);
    return q.center == y;
  };
  return std::visit(
      overloaded{
          [&](const AbsSum& f) -> std::optional<Optimum> {
            return centered_on(f.y) ? at(f.y) : std::nullopt;
          },
          [&](const EuclidNorm& f) -> std::optional<Optimum> {
            return centered_on(f.y) ? at(f.y) : std::nullopt;
          },
          [&](const Linear& f) -> std::optional<Optimum> {
            if (const auto* q = std::get_if<QuadReg>(&obj.r)) {
              return at(project(obj.domain, q->center - f.c / q->mu));
            }
            const auto* ball = std::get_if<Ball>(&obj.domain);
            const double cn = f.c.norm();
            if (ball == nullptr || cn == 0.0) return std::nullopt;
            return at(ball->center - (ball->radius / cn) * f.c);
          },
          [&](const HardLoss& f) -> std::optional<Optimum> {
            const HardInstance& h = *f.instance;
            if (h.kind == HardKind::cvx && !std::holds_alternative<ZeroReg>(obj.r)) return std::nullopt;
            if (h.kind == HardKind::str) {
              const auto* q = std::get_if<QuadReg>(&obj.r);
              if (q == nullptr || q->mu != h.mu || !q->center.isZero(0.0)) return std::nullopt;
            }
            if (!in_domain(obj.domain, h.x_star)) return std::nullopt;
            return Optimum{h.x_star, h.F_star};
          },
          [&](const Reduced& f) -> std::optional<Optimum> { return f.source->optimum; },
      },
      obj.f);
}

double lipschitz_of(const FKind& f) {
  return std::visit(overloaded{
                        [](const AbsSum& k) { return k.M.norm(); },
                        [](const EuclidNorm& k) { return k.G; },
                        [](const Linear& k) { return k.c.norm(); },
                        [](const HardLoss& k) {
                          const HardInstance& h = *k.instance;
                          if (h.kind == HardKind::str) return h.mu * h.x_star.norm();
                          return h.M.cwiseProduct(h.q).norm();
                        },
                        [](const Reduced& k) { return 5.0 * k.source->lipschitz_G; },
                    },
                    f);
}

}  // namespace

Index CompositeObjective::dim() const { return dimension(domain); }

Index dimension(const Domain& domain) {
  if (const auto* a = std::get_if<AllSpace>(&domain)) return a->d;
  return std::get<Ball>(domain).center.size();
}

bool in_domain(const Domain& domain, const Vector& x, double tol) {
  if (x.size() != dimension(domain)) return false;
  if (const auto* b = std::get_if<Ball>(&domain)) return (x - b->center).norm() <= b->radius + tol;
  return true;
}

double modulus(const RKind& r) {
  if (const auto* q = std::get_if<QuadReg>(&r)) return q->mu;
  return 0.0;
}

CompositeObjective make_objective(FKind f, RKind r, Domain domain) {
  if (const auto* q = std::get_if<QuadReg>(&r)) {
    require(q->mu > 0.0, "quadratic regularizer needs mu > 0");
    require(q->center.size() == dimension(domain), "regularizer center has the wrong dimension");
  }
  if (const auto* b = std::get_if<Ball>(&domain)) require(b->radius > 0.0, "ball radius must be positive");
  CompositeObjective obj;
  obj.f = std::move(f);
  obj.r = std::move(r);
  obj.domain = std::move(domain);
  obj.lipschitz_G = lipschitz_of(obj.f);
  obj.mu = modulus(obj.r);
  obj.optimum = closed_form_optimum(obj);
  return obj;
}

double eval_r(const RKind& r, const Vector& x) {
  if (const auto* q = std::get_if<QuadReg>(&r)) return 0.5 * q->mu * (x - q->center).squaredNorm();
  return 0.0;
}

double eval_f(const CompositeObjective& obj, const Vector& x) {
  check_dim(obj, x);
  return std::visit(overloaded{
                        [&](const AbsSum& k) { return k.M.dot((x - k.y).cwiseAbs()); },
                        [&](const EuclidNorm& k) { return k.G * (x - k.y).norm(); },
                        [&](const Linear& k) { return k.c.dot(x); },
                        [&](const HardLoss& k) { return hard_loss(*k.instance, x); },
                        [&](const Reduced& k) {
                          return eval_F(*k.source, x) - 0.5 * k.mu * (x - k.y_ref).squaredNorm();
                        },
                    },
                    obj.f);
}

double eval_F(const CompositeObjective& obj, const Vector& x) { return eval_f(obj, x) + eval_r(obj.r, x); }

Vector subgrad_f(const CompositeObjective& obj, const Vector& x) {
  check_dim(obj, x);
  return std::visit(overloaded{
                        [&](const AbsSum& k) -> Vector {
                          return k.M.cwiseProduct((x - k.y).unaryExpr([](double v) { return sgn(v); }));
                        },
                        [&](const EuclidNorm& k) -> Vector {
                          const Vector diff = x - k.y;
                          const double n = diff.norm();
                          if (n == 0.0) return Vector::Zero(x.size());
                          return (k.G / n) * diff;
                        },
                        [&](const Linear& k) -> Vector { return k.c; },
                        [&](const HardLoss& k) -> Vector { return hard_loss_grad(*k.instance, x); },
                        [&](const Reduced& k) -> Vector {
                          return subgrad_f(*k.source, x) + grad_r(k.source->r, x) - k.mu * (x - k.y_ref);
                        },
                    },
                    obj.f);
}

Vector project(const Domain& domain, const Vector& x) {
  const auto* b = std::get_if<Ball>(&domain);
  if (b == nullptr) return x;
  const Vector diff = x - b->center;
  const double n = diff.norm();
  if (n <= b->radius) return x;
  return b->center + (b->radius / n) * diff;
}

Vector prox_step(const RKind& r, const Domain& domain, const Vector& x_t, const Vector& g, double eta) {
  require(eta > 0.0, "prox_step needs eta > 0");
  return prox_combined(r, domain, x_t, g, eta, 0.0, nullptr);
}

Vector stabilized_prox_step(const RKind& r, const Domain& domain, const Vector& x_t, const Vector& x_1,
                            const Vector& g, double eta_t, double eta_next) {
  require(eta_next > 0.0, "stabilized_prox_step needs eta_next > 0");
  require(eta_next <= eta_t, "stepsize must be nonincreasing");
  const double s = (eta_t / eta_next - 1.0) / eta_t;
  return prox_combined(r, domain, x_t, g, eta_t, s, &x_1);
}

CompositeObjective reduce_strongly_convex(std::shared_ptr<const CompositeObjective> source, double mu,
                                          const Vector& y_ref) {
  require(mu > 0.0, "reduction needs mu > 0");
  require(source != nullptr, "reduction needs a source objective");
  require(y_ref.size() == source->dim(), "y_ref has the wrong dimension");
  Domain domain = source->domain;
  return make_objective(Reduced{std::move(source), mu, y_ref}, QuadReg{mu, y_ref}, std::move(domain));
}

}  // namespace htclip

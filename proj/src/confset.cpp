#include "lkmdp/confset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

namespace lkmdp {

RidgeDesign::RidgeDesign(int dim, double lambda) : dim_(dim), lambda_(lambda) {
  if (dim < 1) throw std::invalid_argument("RidgeDesign: dimension must be positive");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("RidgeDesign: lambda must be positive and finite");
  }
  sigma_ = lambda * Mat::Identity(dim, dim);
  sigma_inv_ = (1.0 / lambda) * Mat::Identity(dim, dim);
  b_ = Vec::Zero(dim);
  log_det_ = dim * std::log(lambda);
}

void RidgeDesign::update(const Vec& x, double y) {
  if (x.size() != dim_) throw std::invalid_argument("RidgeDesign::update: dimension mismatch");
  if (!x.allFinite() || !std::isfinite(y)) {
    throw std::invalid_argument("RidgeDesign::update: non-finite regression pair");
  }
  const Vec sx = sigma_inv_ * x;
  const double quad = x.dot(sx);
  sigma_.noalias() += x * x.transpose();
  b_.noalias() += y * x;
  sigma_inv_.noalias() -= (sx * sx.transpose()) / (1.0 + quad);
  log_det_ += std::log1p(quad);
  ++updates_;
  if (updates_ % kRefactorInterval == 0) refactor();
}

void RidgeDesign::refactor() {
  Eigen::LLT<Mat> llt(sigma_);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("RidgeDesign::refactor: design lost positive definiteness");
  }
  sigma_inv_ = llt.solve(Mat::Identity(dim_, dim_));
  sigma_inv_ = 0.5 * (sigma_inv_ + sigma_inv_.transpose()).eval();
  const Mat& l = llt.matrixLLT();
  double ld = 0.0;
  for (int i = 0; i < dim_; ++i) ld += std::log(l(i, i));
  log_det_ = 2.0 * ld;
}

double beta_radius(double lambda, int d, double gamma, double horizon, double delta) {
  if (!(lambda > 0.0)) throw std::invalid_argument("beta_radius: lambda must be positive");
  if (d < 1) throw std::invalid_argument("beta_radius: d must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("beta_radius: gamma must lie in [0, 1)");
  if (!(horizon >= 0.0)) throw std::invalid_argument("beta_radius: horizon must be non-negative");
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("beta_radius: delta must lie in (0, 1]");
  const double g2 = (1.0 - gamma) * (1.0 - gamma);
  const double ratio = (lambda * g2 + horizon * d) / (delta * lambda * g2);
  return std::sqrt(d * std::log(ratio)) / (1.0 - gamma) + std::sqrt(lambda * d);
}

int u_rounds(double gamma, double horizon) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("u_rounds: gamma must lie in [0, 1)");
  if (!(horizon > 0.0)) throw std::invalid_argument("u_rounds: horizon must be positive");
  const double raw = std::ceil(std::log(horizon / (1.0 - gamma)) / (1.0 - gamma));
  if (!(raw >= 1.0)) return 1;
  return static_cast<int>(std::min(raw, static_cast<double>(std::numeric_limits<int>::max())));
}

bool doubling_triggered(const RidgeDesign& design, double epoch_start_log_det) {
  return design.log_det() > epoch_start_log_det + std::log(2.0);
}

ConfidenceSet::ConfidenceSet(Vec center, double radius, Mat shape,
                             std::shared_ptr<const ValiditySet> validity)
    : center_(std::move(center)), radius_(radius), shape_(std::move(shape)), validity_(std::move(validity)) {
  const auto d = center_.size();
  if (d < 1 || shape_.rows() != d || shape_.cols() != d) {
    throw std::invalid_argument("ConfidenceSet: shape must be d x d");
  }
  if (!(radius_ >= 0.0) || !std::isfinite(radius_)) {
    throw std::invalid_argument("ConfidenceSet: radius must be finite and non-negative");
  }
  if (!validity_) validity_ = std::make_shared<UnconstrainedSet>(static_cast<int>(d));
  if (validity_->dim() != d) throw std::invalid_argument("ConfidenceSet: validity set dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Mat> eig(shape_);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument("ConfidenceSet: shape must be positive definite");
  }
  eigvals_ = eig.eigenvalues();
  eigvecs_ = eig.eigenvectors();
  shape_inv_ = eigvecs_ * eigvals_.cwiseInverse().asDiagonal() * eigvecs_.transpose();
  barrier_ = std::make_shared<BarrierCache>();
}

double ConfidenceSet::mahalanobis(const Vec& theta) const {
  const Vec diff = theta - center_;
  return std::sqrt(std::max(0.0, diff.dot(shape_ * diff)));
}

bool ConfidenceSet::ellipsoid_contains(const Vec& theta, double tol) const {
  return mahalanobis(theta) <= radius_ + tol * std::max(1.0, radius_);
}

double ConfidenceSet::diameter() const { return 2.0 * radius_ / std::sqrt(eigvals_.minCoeff()); }

Vec ConfidenceSet::project_ellipsoid(const Vec& z) const {
  if (radius_ == 0.0) return center_;
  const Vec y = eigvecs_.transpose() * (z - center_);
  const double r2 = radius_ * radius_;
  const Vec ly2 = eigvals_.cwiseProduct(y.cwiseAbs2());
  if (ly2.sum() <= r2) return z;

  // Find μ > 0 with Σ λ_i y_i² / (1 + μ λ_i)² = r². Safeguarded Newton on
  // g(μ) = 1/‖w(μ)‖_Σ − 1/r, which is nearly linear in μ.
  auto norm2 = [&](double mu) {
    return (ly2.array() / (1.0 + mu * eigvals_.array()).square()).sum();
  };
  double lo = 0.0;
  double hi = std::sqrt((y.cwiseAbs2().array() / eigvals_.array()).sum()) / radius_;
  double mu = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double n2 = norm2(mu);
    const double g = 1.0 / std::sqrt(n2) - 1.0 / radius_;
    if (g < 0.0) lo = mu; else hi = mu;
    if (std::abs(g) * radius_ < 1e-15) break;
    // d/dμ ‖w‖² = −2 Σ λ_i² y_i² / (1 + μλ_i)³, so g' = ‖w‖⁻³ Σ λ_i² y_i² / (1 + μλ_i)³.
    const double dn2 = (eigvals_.array() * ly2.array() / (1.0 + mu * eigvals_.array()).cube()).sum();
    const double dg = dn2 / (n2 * std::sqrt(n2));
    double next = mu - g / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == mu) break;
    mu = next;
  }
  const Vec w = (y.array() / (1.0 + mu * eigvals_.array())).matrix();
  return center_ + eigvecs_ * w;
}

Vec ConfidenceSet::project_intersection(const Vec& z, double tol, int max_iters) const {
  Vec x = z;
  Vec p = Vec::Zero(z.size());
  Vec q = Vec::Zero(z.size());
  Vec xn = x;
  for (int it = 0; it < max_iters; ++it) {
    const Vec y = project_ellipsoid(x + p);
    p = x + p - y;
    xn = validity_->project(y + q);
    q = y + q - xn;
    if ((xn - x).norm() <= tol && (xn - y).norm() <= tol) break;
    x = xn;
  }
  return xn;
}

std::optional<Vec> ConfidenceSet::feasible_point(double tol) const {
  if (radius_ == 0.0) {
    if (validity_->contains(center_, tol)) return center_;
    return std::nullopt;
  }
  Vec x = validity_->project(center_);
  if (ellipsoid_contains(x, tol)) return x;
  double checkpoint_gap = std::numeric_limits<double>::infinity();
  const double scale = std::max(diameter(), 1e-12);
  for (int it = 1; it <= 20000; ++it) {
    const Vec y = project_ellipsoid(x);
    x = validity_->project(y);
    if (ellipsoid_contains(x, tol)) return x;
    if (it % 250 == 0) {
      const double gap = (x - y).norm();
      if (gap > 1e-9 * scale && gap > 0.999 * checkpoint_gap) return std::nullopt;
      checkpoint_gap = gap;
    }
  }
  return std::nullopt;
}

LinearMaxResult ellipsoid_support(const ConfidenceSet& cs, const Vec& x) {
  if (x.size() != cs.dim()) throw std::invalid_argument("ellipsoid_support: dimension mismatch");
  LinearMaxResult out;
  const Vec sx = cs.shape_inv() * x;
  const double norm = std::sqrt(std::max(0.0, x.dot(sx)));
  if (norm == 0.0 || cs.radius() == 0.0) {
    out.argmax = cs.center();
  } else {
    out.argmax = cs.center() + (cs.radius() / norm) * sx;
  }
  out.value = cs.center().dot(x) + cs.radius() * norm;
  return out;
}

namespace {

// Pull `theta` toward the feasible `anchor` until the ellipsoid constraint holds.
Vec repair_into_ellipsoid(const ConfidenceSet& cs, const Vec& theta, const Vec& anchor, double tol) {
  if (cs.ellipsoid_contains(theta, tol)) return theta;
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cs.ellipsoid_contains(anchor + mid * (theta - anchor), 0.5 * tol)) lo = mid; else hi = mid;
  }
  return anchor + lo * (theta - anchor);
}

}  // namespace

LinearMaxResult projected_ascent_linear_max(const ConfidenceSet& cs, const Vec& x, const SolverOptions& options,
                                            const Vec* warm_start) {
  if (x.size() != cs.dim()) throw std::invalid_argument("projected_ascent_linear_max: dimension mismatch");
  const ValiditySet& b = cs.validity();
  const double tol = options.tol;
  if (!b.can_project()) throw UnsupportedOperation("constrained_linear_max: validity set has no projection");

  Vec theta;
  if (warm_start != nullptr && warm_start->size() == x.size() && b.contains(*warm_start, tol) &&
      cs.ellipsoid_contains(*warm_start, tol)) {
    theta = *warm_start;
  } else {
    auto point = cs.feasible_point(tol);
    if (!point) throw InfeasibleError("C ∩ B is empty");
    theta = std::move(*point);
  }
  const Vec anchor = theta;

  const double diam = std::max(cs.diameter(), 1e-300);
  const double xnorm = x.norm();
  if (xnorm == 0.0) return {0.0, theta, 0, true};
  const double step = diam / xnorm;
  // With step·‖x‖ = diam, a fixed-point move of ε certifies suboptimality ≤ ε·‖x‖.
  const double move_tol = tol * std::max(cs.radius(), 1e-12);
  const double inner_tol = 1e-2 * move_tol;

  LinearMaxResult out;
  out.argmax = theta;
  out.value = theta.dot(x);
  out.converged = false;
  int it = 0;
  for (; it < options.iters; ++it) {
    Vec next = cs.project_intersection(theta + step * x, inner_tol);
    next = repair_into_ellipsoid(cs, next, anchor, tol);
    const double move = (next - theta).norm();
    theta = std::move(next);
    const double value = theta.dot(x);
    if (value > out.value) {
      out.value = value;
      out.argmax = theta;
    }
    if (move <= move_tol) {
      out.converged = true;
      ++it;
      break;
    }
  }
  out.iterations = it;
  return out;
}

// ------------------------------------------------------------ barrier method

// Reduced problem in coordinates z with θ = theta0 + N_theta·z (aux = aux0 + N_aux·z):
//   linear rows G z ≤ h (unit-norm rows), ellipsoid ½zᵀQz + pᵀz + r ≤ 0.
struct BarrierCache {
  std::once_flag once;
  bool usable = false;
  Vec theta0;
  Mat n_theta;
  Mat G;
  Vec h;
  Mat Q;
  Vec p;
  double r = 0.0;
  std::optional<Vec> interior;  // strictly feasible z
  std::optional<Vec> single_point;  // B = {θ} when the equalities pin every coordinate
};

namespace {

struct BarrierProblem {
  const Mat* G;
  const Vec* h;
  const Mat* Q;
  const Vec* p;
  double r;
  Vec obj;
  // Phase I: an extra last coordinate s relaxes every constraint (g(z) ≤ s).
  bool relaxed = false;
};

struct Slacks {
  Vec lin;    // h − G z (+ s)
  double quad;  // −(½zᵀQz + pᵀz + r) (+ s)
  bool ok;
};

Slacks slacks(const BarrierProblem& P, const Vec& y) {
  const Eigen::Index k = P.G->cols();
  const auto z = y.head(k);
  const double s = P.relaxed ? y[k] : 0.0;
  Slacks out;
  out.lin = *P.h - *P.G * z;
  out.lin.array() += s;
  out.quad = -(0.5 * z.dot(*P.Q * z) + P.p->dot(z) + P.r) + s;
  out.ok = out.quad > 0.0 && (out.lin.size() == 0 || out.lin.minCoeff() > 0.0);
  return out;
}

double barrier_objective(const BarrierProblem& P, double t, const Vec& y, const Slacks& sl) {
  return t * P.obj.dot(y) - sl.lin.array().log().sum() - std::log(sl.quad);
}

// Newton centering of t·objᵀy − Σ log(slack). Returns false if numerically stuck.
constexpr double kCenteredDecrement = 1e-3;

bool center(const BarrierProblem& P, double t, Vec& y) {
  const Eigen::Index k = P.G->cols();
  const Eigen::Index n = y.size();
  double last_dec2 = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 500; ++it) {
    const Slacks sl = slacks(P, y);
    // Gradient of each constraint g = −slack with respect to y.
    Vec grad = t * P.obj;
    Mat H = Mat::Zero(n, n);
    const Vec inv = sl.lin.cwiseInverse();
    Mat Gy(P.G->rows(), n);
    Gy.leftCols(k) = *P.G;
    if (P.relaxed) Gy.col(k).setConstant(-1.0);
    grad.noalias() += Gy.transpose() * inv;
    H.noalias() += Gy.transpose() * inv.cwiseAbs2().asDiagonal() * Gy;
    Vec gq = Vec::Zero(n);
    gq.head(k) = *P.Q * y.head(k) + *P.p;
    if (P.relaxed) gq[k] = -1.0;
    grad += gq / sl.quad;
    H.noalias() += gq * gq.transpose() / (sl.quad * sl.quad);
    H.topLeftCorner(k, k) += *P.Q / sl.quad;

    Eigen::LDLT<Mat> ldlt(H);
    Vec dy = ldlt.solve(-grad);
    if (ldlt.info() != Eigen::Success || !dy.allFinite()) {
      const double reg = 1e-12 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
      dy = (H + reg * Mat::Identity(n, n)).ldlt().solve(-grad);
      if (!dy.allFinite()) return false;
    }
    const double dec2 = -grad.dot(dy);
    last_dec2 = dec2;
    if (dec2 <= 1e-6) return true;

    const double f0 = barrier_objective(P, t, y, sl);
    double alpha = 1.0;
    for (;;) {
      const Vec trial = y + alpha * dy;
      const Slacks ts = slacks(P, trial);
      if (ts.ok && barrier_objective(P, t, trial, ts) <= f0 - 0.25 * alpha * dec2) {
        y = trial;
        break;
      }
      alpha *= 0.5;
      if (alpha < 1e-16) return dec2 <= kCenteredDecrement;
    }
  }
  // At large t the objective's rounding noise can exceed the Armijo decrease, so a
  // small decrement at the cap still means the point is close to the central path.
  return last_dec2 <= kCenteredDecrement;
}

void build_cache(const ConfidenceSet& cs, BarrierCache& cache) {
  const auto poly = cs.validity().polyhedron();
  if (!poly) return;
  const Eigen::Index d = cs.dim();
  const Eigen::Index n = d + poly->n_aux;

  Vec w0 = Vec::Zero(n);
  Mat N = Mat::Identity(n, n);
  if (poly->A.rows() > 0) {
    Eigen::JacobiSVD<Mat> svd(poly->A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec& sv = svd.singularValues();
    const double cutoff = 1e-12 * std::max(1.0, sv.size() ? sv[0] : 0.0);
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv[rank] > cutoff) ++rank;
    svd.setThreshold(cutoff);
    w0 = svd.solve(poly->c);
    if ((poly->A * w0 - poly->c).norm() > 1e-9 * (1.0 + poly->c.norm())) return;  // inconsistent equalities
    N = svd.matrixV().rightCols(n - rank);
  }
  const Eigen::Index k = N.cols();
  if (k == 0) {
    if (poly->G.rows() == 0 || (poly->G * w0 - poly->h).maxCoeff() <= 1e-9) cache.single_point = w0.head(d);
    return;
  }

  // Linear rows in z, normalized; constant rows must hold strictly or are dropped.
  const Mat Gz = poly->G * N;
  const Vec hz = poly->h - poly->G * w0;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < Gz.rows(); ++i) {
    const double nrm = Gz.row(i).norm();
    if (nrm > 1e-12) {
      keep.push_back(i);
    } else if (hz[i] < -1e-12) {
      return;  // B is empty
    }
  }
  cache.G.resize(static_cast<Eigen::Index>(keep.size()), k);
  cache.h.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    const double nrm = Gz.row(keep[j]).norm();
    cache.G.row(static_cast<Eigen::Index>(j)) = Gz.row(keep[j]) / nrm;
    cache.h[static_cast<Eigen::Index>(j)] = hz[keep[j]] / nrm;
  }

  cache.theta0 = w0.head(d);
  cache.n_theta = N.topRows(d);
  const double b2 = cs.radius() * cs.radius();
  const Vec r0 = cache.theta0 - cs.center();
  const Mat SN = cs.shape() * cache.n_theta;
  cache.Q = 2.0 * cache.n_theta.transpose() * SN / b2;
  cache.Q = 0.5 * (cache.Q + cache.Q.transpose()).eval();
  cache.p = 2.0 * SN.transpose() * r0 / b2;
  cache.r = r0.dot(cs.shape() * r0) / b2 - 1.0;

  // Phase I: minimize s subject to every constraint ≤ s, starting from the
  // reduced coordinates closest to a feasible θ.
  const auto feasible = cs.feasible_point();
  if (!feasible) return;
  BarrierProblem P{&cache.G, &cache.h, &cache.Q, &cache.p, cache.r, Vec::Zero(k + 1), true};
  P.obj[k] = 1.0;
  Vec y = Vec::Zero(k + 1);
  y.head(k) = cache.n_theta.completeOrthogonalDecomposition().solve(*feasible - cache.theta0);
  const Slacks start = slacks(P, y);
  double worst = -start.quad;
  if (start.lin.size() > 0) worst = std::max(worst, (-start.lin).maxCoeff());
  y[k] = worst + 1.0;
  const double m = static_cast<double>(cache.G.rows() + 1);
  double t = 1.0;
  for (int stage = 0; stage < 40; ++stage) {
    if (!center(P, t, y)) break;
    if (y[k] < 0.0) {
      cache.interior = y.head(k);
      break;
    }
    if (y[k] - m / t >= 0.0 || m / t < 1e-13) break;  // no interior point
    t *= 10.0;
  }
  cache.usable = cache.interior.has_value();
}

}  // namespace

std::optional<LinearMaxResult> barrier_linear_max(const ConfidenceSet& cs, const Vec& x, const SolverOptions& options) {
  if (x.size() != cs.dim()) throw std::invalid_argument("barrier_linear_max: dimension mismatch");
  if (cs.radius() == 0.0) return std::nullopt;
  BarrierCache& cache = *cs.barrier_;
  std::call_once(cache.once, [&] { build_cache(cs, cache); });
  if (cache.single_point) {
    if (!cs.ellipsoid_contains(*cache.single_point, options.tol)) return std::nullopt;
    return LinearMaxResult{cache.single_point->dot(x), *cache.single_point, 0, true};
  }
  if (!cache.usable) return std::nullopt;

  const Eigen::Index k = cache.n_theta.cols();
  const Vec obj = -(cache.n_theta.transpose() * x);
  BarrierProblem P{&cache.G, &cache.h, &cache.Q, &cache.p, cache.r, obj, false};
  Vec z = *cache.interior;
  const double m = static_cast<double>(cache.G.rows() + 1);
  const double xnorm = x.norm();
  const double gap_tol = 0.1 * options.tol * xnorm * std::max(cs.radius(), 1e-12);
  // The ellipsoid support value bounds the optimum, so it bounds the initial gap.
  const double start_value = (cache.theta0 + cache.n_theta * z).dot(x);
  const double gap0 = std::max(ellipsoid_support(cs, x).value - start_value, gap_tol);
  double t = m / gap0;

  LinearMaxResult out;
  out.converged = false;
  int stages = 0;
  for (; stages < 60; ++stages) {
    if (!center(P, t, z)) break;
    if (m / t <= gap_tol) {
      out.converged = true;
      ++stages;
      break;
    }
    t *= 20.0;
  }
  if (k == 0) z.resize(0);
  out.argmax = cache.theta0 + cache.n_theta * z;
  out.value = out.argmax.dot(x);
  out.iterations = stages;
  return out;
}

LinearMaxResult constrained_linear_max(const ConfidenceSet& cs, const Vec& x, const SolverOptions& options,
                                       const Vec* warm_start) {
  if (x.size() != cs.dim()) throw std::invalid_argument("constrained_linear_max: dimension mismatch");
  const ValiditySet& b = cs.validity();
  const double tol = options.tol;

  if (cs.radius() == 0.0) {
    if (!b.contains(cs.center(), tol)) throw InfeasibleError("C ∩ B is empty (point set outside B)");
    return {cs.center().dot(x), cs.center(), 0, true};
  }

  if (x.squaredNorm() == 0.0) {
    auto point = cs.feasible_point(tol);
    if (!point) throw InfeasibleError("C ∩ B is empty");
    return {0.0, *point, 0, true};
  }

  LinearMaxResult ell = ellipsoid_support(cs, x);
  if (b.contains(ell.argmax, tol)) return ell;

  if (auto vertex = b.linear_max(x); vertex && cs.ellipsoid_contains(*vertex, tol)) {
    return {vertex->dot(x), *vertex, 0, true};
  }

  auto res = barrier_linear_max(cs, x, options);
  if (res && res->converged) return *res;
  LinearMaxResult pga = projected_ascent_linear_max(cs, x, options, warm_start);
  // Both candidates are feasible, so the larger value is the better bound.
  if (res && res->value > pga.value) {
    res->converged = false;
    return *res;
  }
  return pga;
}

}  // namespace lkmdp

#pragma once

#include <memory>
#include <optional>

#include "lkmdp/types.hpp"
#include "lkmdp/validity.hpp"

namespace lkmdp {

/// Running statistics of the regularized least-squares problem
///   min_θ Σ (⟨θ, x_i⟩ − y_i)² + λ‖θ‖².
///
/// Keeps Σ = λI + Σ x xᵀ, b = Σ y x, Σ⁻¹ (rank-one inverse updates) and
/// log det Σ (matrix determinant lemma). Every kRefactorInterval updates the
/// inverse and log-determinant are rebuilt from a Cholesky factorization.
class RidgeDesign {
 public:
  static constexpr long kRefactorInterval = 1000;

  RidgeDesign(int dim, double lambda);

  void update(const Vec& x, double y);
  Vec theta_hat() const { return sigma_inv_ * b_; }

  // Dense rebuild of sigma_inv and log_det from sigma.
  void refactor();

  int dim() const { return dim_; }
  double lambda() const { return lambda_; }
  const Mat& sigma() const { return sigma_; }
  const Mat& sigma_inv() const { return sigma_inv_; }
  const Vec& b() const { return b_; }
  double log_det() const { return log_det_; }
  long updates() const { return updates_; }

 private:
  int dim_;
  double lambda_;
  Mat sigma_;
  Mat sigma_inv_;
  Vec b_;
  double log_det_;
  long updates_ = 0;
};

// Confidence radius
//   β = (1/(1−γ))·sqrt(d·ln((λ(1−γ)² + T·d)/(δ·λ(1−γ)²))) + sqrt(λ·d).
double beta_radius(double lambda, int d, double gamma, double horizon, double delta);

// Number of value-iteration sweeps, max(1, ⌈ln(T/(1−γ))/(1−γ)⌉).
int u_rounds(double gamma, double horizon);

// det Σ_t > 2·det Σ_{t_k}, evaluated in log space.
bool doubling_triggered(const RidgeDesign& design, double epoch_start_log_det);

struct LinearMaxResult {
  double value = 0.0;
  Vec argmax;
  int iterations = 0;
  bool converged = true;
};

struct SolverOptions {
  int iters = 500;
  double tol = 1e-8;
};

struct LinearMaxResult;
struct SolverOptions;
struct BarrierCache;

/// Ellipsoid C = {θ : ‖Σ^{1/2}(θ − center)‖ ≤ radius} paired with a validity set B.
class ConfidenceSet {
 public:
  ConfidenceSet(Vec center, double radius, Mat shape, std::shared_ptr<const ValiditySet> validity);

  int dim() const { return static_cast<int>(center_.size()); }
  const Vec& center() const { return center_; }
  double radius() const { return radius_; }
  const Mat& shape() const { return shape_; }
  const Mat& shape_inv() const { return shape_inv_; }
  const ValiditySet& validity() const { return *validity_; }
  std::shared_ptr<const ValiditySet> validity_ptr() const { return validity_; }

  // ‖Σ^{1/2}(θ − center)‖₂.
  double mahalanobis(const Vec& theta) const;
  bool ellipsoid_contains(const Vec& theta, double tol = 1e-8) const;
  // Euclidean projection onto the ellipsoid.
  Vec project_ellipsoid(const Vec& z) const;
  // Euclidean projection onto C ∩ B (Dykstra). Result lies in B.
  Vec project_intersection(const Vec& z, double tol, int max_iters = 2000) const;

  // Some point of C ∩ B, or nullopt when the intersection is empty.
  std::optional<Vec> feasible_point(double tol = 1e-8) const;
  bool intersects_validity(double tol = 1e-8) const { return feasible_point(tol).has_value(); }

  // Euclidean diameter of the ellipsoid.
  double diameter() const;

 private:
  Vec center_;
  double radius_;
  Mat shape_;
  Mat shape_inv_;
  std::shared_ptr<const ValiditySet> validity_;
  Mat eigvecs_;
  Vec eigvals_;
  // Reduced barrier problem for polyhedral B, built on first use; shared by copies.
  std::shared_ptr<BarrierCache> barrier_;

  friend std::optional<LinearMaxResult> barrier_linear_max(const ConfidenceSet&, const Vec&, const SolverOptions&);
};

// max ⟨θ, x⟩ over the ellipsoid alone (closed form).
LinearMaxResult ellipsoid_support(const ConfidenceSet& cs, const Vec& x);

/// max ⟨θ, x⟩ over C ∩ B by log-barrier interior-point iterations on the
/// polyhedral description of B. The duality gap certifies the value to within
/// 0.1·tol·‖x‖·β. Returns nullopt when B is not polyhedral or C ∩ B has no
/// interior point.
std::optional<LinearMaxResult> barrier_linear_max(const ConfidenceSet& cs, const Vec& x,
                                                  const SolverOptions& options = {});

/// max ⟨θ, x⟩ over C ∩ B by projected gradient ascent with Dykstra projections
/// onto C ∩ B, started from `warm_start` (if feasible) or a feasible point.
LinearMaxResult projected_ascent_linear_max(const ConfidenceSet& cs, const Vec& x,
                                            const SolverOptions& options = {},
                                            const Vec* warm_start = nullptr);

/// max ⟨θ, x⟩ over C ∩ B.
///
/// Closed-form answers are used when the ellipsoid maximizer lies in B or the
/// B maximizer lies in C; otherwise the barrier method runs, and projected
/// gradient ascent covers the cases it declines. Throws InfeasibleError when
/// C ∩ B is empty.
LinearMaxResult constrained_linear_max(const ConfidenceSet& cs, const Vec& x,
                                       const SolverOptions& options = {},
                                       const Vec* warm_start = nullptr);

}  // namespace lkmdp

#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "lkmdp/types.hpp"

namespace lkmdp {

/// Linear description {θ : ∃u, G[θ; u] ≤ h, A[θ; u] = c} with `n_aux`
/// auxiliary coordinates u appended after θ.
struct Polyhedron {
  int n_aux = 0;
  Mat G;
  Vec h;
  Mat A;
  Vec c;
};

/// Convex parameter set used in place of B (the set of θ whose induced
/// transition vectors are probability distributions).
///
/// Each environment family supplies one. `contains` and `project` refer to the
/// same set, which is always a subset of the exact B; the exact membership
/// test over every (s, a) lives on the environment (`b_contains`).
class ValiditySet {
 public:
  virtual ~ValiditySet() = default;

  virtual int dim() const = 0;
  virtual bool contains(const Vec& theta, double tol = 1e-9) const = 0;
  virtual bool can_project() const { return true; }
  // Euclidean projection. Throws UnsupportedOperation when can_project() is false.
  virtual Vec project(const Vec& theta) const = 0;
  // A maximizer of <x, theta> over the set, when it has a closed form.
  virtual std::optional<Vec> linear_max(const Vec& /*x*/) const { return std::nullopt; }
  // Linear description of the set, when it is a polyhedron.
  virtual std::optional<Polyhedron> polyhedron() const { return std::nullopt; }
};

/// All of R^d.
class UnconstrainedSet final : public ValiditySet {
 public:
  explicit UnconstrainedSet(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  bool contains(const Vec& theta, double tol = 1e-9) const override;
  Vec project(const Vec& theta) const override { return theta; }
  std::optional<Polyhedron> polyhedron() const override;

 private:
  int dim_;
};

/// Product of probability simplices over disjoint index blocks. Coordinates
/// in no block are unconstrained.
class SimplexBlocksSet final : public ValiditySet {
 public:
  SimplexBlocksSet(int dim, std::vector<std::vector<int>> blocks);
  int dim() const override { return dim_; }
  bool contains(const Vec& theta, double tol = 1e-9) const override;
  Vec project(const Vec& theta) const override;
  std::optional<Vec> linear_max(const Vec& x) const override;
  std::optional<Polyhedron> polyhedron() const override;
  const std::vector<std::vector<int>>& blocks() const { return blocks_; }

 private:
  int dim_;
  std::vector<std::vector<int>> blocks_;
  std::vector<bool> free_;
};

/// {θ : θ_last = 1, ‖θ_{0..d-2}‖₁ ≤ radius}.
class L1SliceSet final : public ValiditySet {
 public:
  L1SliceSet(int dim, double radius);
  int dim() const override { return dim_; }
  bool contains(const Vec& theta, double tol = 1e-9) const override;
  Vec project(const Vec& theta) const override;
  std::optional<Vec> linear_max(const Vec& x) const override;
  // Lifted form: −u ≤ θ_head ≤ u, Σu ≤ radius, θ_last = 1.
  std::optional<Polyhedron> polyhedron() const override;
  double radius() const { return radius_; }

 private:
  int dim_;
  double radius_;
};

/// {θ : Gθ ≤ h, Aθ = c}. Projection by Hildreth's dual coordinate ascent.
class PolyhedralSet final : public ValiditySet {
 public:
  PolyhedralSet(Mat G, Vec h, Mat A, Vec c);
  int dim() const override { return static_cast<int>(dim_); }
  bool contains(const Vec& theta, double tol = 1e-9) const override;
  Vec project(const Vec& theta) const override;
  std::optional<Polyhedron> polyhedron() const override;

 private:
  Eigen::Index dim_;
  Mat rows_;  // stacked [G; A]
  Vec rhs_;
  Eigen::Index n_ineq_;
  Vec row_norm2_;
};

/// Euclidean projection onto {x : x ≥ 0, Σx = radius}.
Vec project_simplex(const Vec& v, double radius = 1.0);
/// Euclidean projection onto {x : ‖x‖₁ ≤ radius}.
Vec project_l1_ball(const Vec& v, double radius);

}  // namespace lkmdp

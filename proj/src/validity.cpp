#include "lkmdp/validity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lkmdp {

Vec project_simplex(const Vec& v, double radius) {
  const Eigen::Index n = v.size();
  if (n == 0) return v;
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumsum += u[k];
    const double t = (cumsum - radius) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) tau = t;
  }
  return (v.array() - tau).max(0.0).matrix();
}

Vec project_l1_ball(const Vec& v, double radius) {
  if (v.lpNorm<1>() <= radius) return v;
  const Vec mag = project_simplex(v.cwiseAbs(), radius);
  Vec out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v[i] < 0.0 ? -mag[i] : mag[i];
  return out;
}

bool UnconstrainedSet::contains(const Vec& theta, double) const {
  return theta.size() == dim_ && theta.allFinite();
}

SimplexBlocksSet::SimplexBlocksSet(int dim, std::vector<std::vector<int>> blocks)
    : dim_(dim), blocks_(std::move(blocks)), free_(static_cast<std::size_t>(dim), true) {
  for (const auto& block : blocks_) {
    for (int i : block) {
      if (i < 0 || i >= dim_ || !free_[i]) {
        throw std::invalid_argument("SimplexBlocksSet: blocks must be disjoint indices in range");
      }
      free_[i] = false;
    }
  }
}

bool SimplexBlocksSet::contains(const Vec& theta, double tol) const {
  if (theta.size() != dim_) return false;
  for (const auto& block : blocks_) {
    double sum = 0.0;
    for (int i : block) {
      if (theta[i] < -tol) return false;
      sum += theta[i];
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

Vec SimplexBlocksSet::project(const Vec& theta) const {
  Vec out = theta;
  for (const auto& block : blocks_) {
    Vec sub(block.size());
    for (std::size_t k = 0; k < block.size(); ++k) sub[k] = theta[block[k]];
    sub = project_simplex(sub);
    for (std::size_t k = 0; k < block.size(); ++k) out[block[k]] = sub[k];
  }
  return out;
}

std::optional<Vec> SimplexBlocksSet::linear_max(const Vec& x) const {
  for (int i = 0; i < dim_; ++i) {
    if (free_[i] && x[i] != 0.0) return std::nullopt;  // unbounded direction
  }
  Vec out = Vec::Zero(dim_);
  for (const auto& block : blocks_) {
    int best = block.front();
    for (int i : block) {
      if (x[i] > x[best]) best = i;
    }
    out[best] = 1.0;
  }
  return out;
}

L1SliceSet::L1SliceSet(int dim, double radius) : dim_(dim), radius_(radius) {
  if (dim < 1 || !(radius >= 0.0)) throw std::invalid_argument("L1SliceSet: bad dimension or radius");
}

bool L1SliceSet::contains(const Vec& theta, double tol) const {
  if (theta.size() != dim_) return false;
  if (std::abs(theta[dim_ - 1] - 1.0) > tol) return false;
  return theta.head(dim_ - 1).lpNorm<1>() <= radius_ + tol;
}

Vec L1SliceSet::project(const Vec& theta) const {
  Vec out(dim_);
  out.head(dim_ - 1) = project_l1_ball(theta.head(dim_ - 1), radius_);
  out[dim_ - 1] = 1.0;
  return out;
}

std::optional<Vec> L1SliceSet::linear_max(const Vec& x) const {
  Vec out = Vec::Zero(dim_);
  out[dim_ - 1] = 1.0;
  if (dim_ > 1) {
    Eigen::Index best = 0;
    const double m = x.head(dim_ - 1).cwiseAbs().maxCoeff(&best);
    if (m > 0.0) out[best] = x[best] > 0.0 ? radius_ : -radius_;
  }
  return out;
}

PolyhedralSet::PolyhedralSet(Mat G, Vec h, Mat A, Vec c)
    : dim_(G.rows() > 0 ? G.cols() : A.cols()), n_ineq_(G.rows()) {
  if (G.rows() != h.size() || A.rows() != c.size() || (G.rows() > 0 && A.rows() > 0 && G.cols() != A.cols())) {
    throw std::invalid_argument("PolyhedralSet: inconsistent constraint shapes");
  }
  rows_.resize(G.rows() + A.rows(), dim_);
  rows_ << G, A;
  rhs_.resize(h.size() + c.size());
  rhs_ << h, c;
  row_norm2_ = rows_.rowwise().squaredNorm();
}

bool PolyhedralSet::contains(const Vec& theta, double tol) const {
  if (theta.size() != dim_) return false;
  const Vec r = rows_ * theta - rhs_;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (i < n_ineq_ ? r[i] > tol : std::abs(r[i]) > tol) return false;
  }
  return true;
}

Vec PolyhedralSet::project(const Vec& theta) const {
  // min ½‖x − θ‖² s.t. rows·x (≤ | =) rhs; dual coordinate ascent, x = θ − rowsᵀμ.
  const Eigen::Index m = rows_.rows();
  Vec mu = Vec::Zero(m);
  Vec x = theta;
  constexpr int kMaxSweeps = 20000;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (row_norm2_[i] == 0.0) continue;
      const double resid = rows_.row(i).dot(x) - rhs_[i];
      double next = mu[i] + resid / row_norm2_[i];
      if (i < n_ineq_) next = std::max(0.0, next);
      const double step = next - mu[i];
      if (step != 0.0) {
        x.noalias() -= step * rows_.row(i).transpose();
        mu[i] = next;
        max_change = std::max(max_change, std::abs(step) * std::sqrt(row_norm2_[i]));
      }
    }
    if (max_change < 1e-15 * (1.0 + x.norm())) break;
  }
  return x;
}

}  // namespace lkmdp

namespace lkmdp {

std::optional<Polyhedron> UnconstrainedSet::polyhedron() const {
  Polyhedron p;
  p.G.resize(0, dim_);
  p.h.resize(0);
  p.A.resize(0, dim_);
  p.c.resize(0);
  return p;
}

std::optional<Polyhedron> SimplexBlocksSet::polyhedron() const {
  std::size_t n_ineq = 0;
  for (const auto& block : blocks_) n_ineq += block.size();
  Polyhedron p;
  p.G = Mat::Zero(static_cast<Eigen::Index>(n_ineq), dim_);
  p.h = Vec::Zero(static_cast<Eigen::Index>(n_ineq));
  p.A = Mat::Zero(static_cast<Eigen::Index>(blocks_.size()), dim_);
  p.c = Vec::Ones(static_cast<Eigen::Index>(blocks_.size()));
  Eigen::Index row = 0;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    for (int i : blocks_[b]) {
      p.G(row++, i) = -1.0;
      p.A(static_cast<Eigen::Index>(b), i) = 1.0;
    }
  }
  return p;
}

std::optional<Polyhedron> L1SliceSet::polyhedron() const {
  const int k = dim_ - 1;
  const int n = dim_ + k;
  Polyhedron p;
  p.n_aux = k;
  p.G = Mat::Zero(2 * k + 1, n);
  p.h = Vec::Zero(2 * k + 1);
  for (int i = 0; i < k; ++i) {
    p.G(2 * i, i) = 1.0;
    p.G(2 * i, dim_ + i) = -1.0;
    p.G(2 * i + 1, i) = -1.0;
    p.G(2 * i + 1, dim_ + i) = -1.0;
    p.G(2 * k, dim_ + i) = 1.0;
  }
  p.h[2 * k] = radius_;
  p.A = Mat::Zero(1, n);
  p.A(0, dim_ - 1) = 1.0;
  p.c = Vec::Ones(1);
  return p;
}

std::optional<Polyhedron> PolyhedralSet::polyhedron() const {
  Polyhedron p;
  p.G = rows_.topRows(n_ineq_);
  p.h = rhs_.head(n_ineq_);
  p.A = rows_.bottomRows(rows_.rows() - n_ineq_);
  p.c = rhs_.tail(rows_.rows() - n_ineq_);
  return p;
}

}  // namespace lkmdp

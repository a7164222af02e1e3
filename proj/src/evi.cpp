#include "lkmdp/evi.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace lkmdp {

ActionId greedy_action(const QTable& q, StateId s) {
  const auto row = q.values.row(s);
  ActionId best = 0;
  for (ActionId a = 1; a < row.size(); ++a) {
    if (row[a] > row[best]) best = a;
  }
  return best;
}

std::vector<ActionId> greedy_policy(const QTable& q) {
  std::vector<ActionId> policy(static_cast<std::size_t>(q.values.rows()));
  for (StateId s = 0; s < q.values.rows(); ++s) policy[s] = greedy_action(q, s);
  return policy;
}

Vec greedy_values(const QTable& q) { return q.values.rowwise().maxCoeff(); }

QTable optimistic_backup(const QTable& prev, const ConfidenceSet& cs, const LinearKernelMdp& model,
                         const EviOptions& options, BackupWorkspace* workspace) {
  const int S = model.n_states();
  const int A = model.n_actions();
  if (prev.values.rows() != S || prev.values.cols() != A) {
    throw std::invalid_argument("optimistic_backup: Q table shape does not match the model");
  }
  const double gamma = model.gamma();
  const double vmax = 1.0 / (1.0 - gamma);
  const Vec v_prev = greedy_values(prev);

  BackupWorkspace local;
  BackupWorkspace& ws = workspace ? *workspace : local;
  if (ws.warm.size() != static_cast<std::size_t>(S) * A) ws.warm.assign(static_cast<std::size_t>(S) * A, Vec());

  // Identical directions (e.g. every action at an absorbing state) share one solve.
  std::map<std::vector<double>, double> solved;

  QTable out;
  out.values.resize(S, A);
  out.u_done = prev.u_done + 1;
  for (StateId s = 0; s < S; ++s) {
    for (ActionId a = 0; a < A; ++a) {
      const Vec x = model.phi_v(v_prev, s, a);
      std::vector<double> key(x.data(), x.data() + x.size());
      double inner;
      if (auto it = solved.find(key); it != solved.end()) {
        inner = it->second;
      } else {
        Vec& warm = ws.warm[model.index(s, a)];
        const LinearMaxResult res = constrained_linear_max(cs, x, options.solver, warm.size() ? &warm : nullptr);
        ++ws.solver_calls;
        if (!res.converged) ++ws.nonconverged;
        warm = res.argmax;
        inner = res.value;
        solved.emplace(std::move(key), inner);
      }
      if (options.clip) inner = std::clamp(inner, 0.0, vmax);
      out.values(s, a) = model.reward(s, a) + gamma * inner;
    }
  }
  return out;
}

EviResult evi(const ConfidenceSet& cs, int rounds, const LinearKernelMdp& model, const EviOptions& options) {
  if (rounds < 1) throw std::invalid_argument("evi: need at least one round");
  if (cs.dim() != model.dim()) throw std::invalid_argument("evi: confidence set dimension mismatch");
  EviResult result;
  result.q.values = Mat::Constant(model.n_states(), model.n_actions(), 1.0 / (1.0 - model.gamma()));
  result.q.u_done = 0;

  const auto start = cs.feasible_point(options.solver.tol);
  if (!start) {
    result.feasible = false;
    return result;
  }

  BackupWorkspace ws;
  ws.warm.assign(static_cast<std::size_t>(model.n_states()) * model.n_actions(), *start);
  result.gaps.reserve(static_cast<std::size_t>(rounds));
  for (int u = 1; u <= rounds; ++u) {
    QTable next = optimistic_backup(result.q, cs, model, options, &ws);
    result.gaps.push_back((next.values - result.q.values).cwiseAbs().maxCoeff());
    result.q = std::move(next);
  }
  result.solver_calls = ws.solver_calls;
  result.nonconverged = ws.nonconverged;
  return result;
}

}  // namespace lkmdp

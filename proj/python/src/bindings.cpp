#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lkmdp/confset.hpp"
#include "lkmdp/envs.hpp"
#include "lkmdp/eval.hpp"
#include "lkmdp/evi.hpp"
#include "lkmdp/harness.hpp"
#include "lkmdp/mcint.hpp"
#include "lkmdp/uclk.hpp"

namespace py = pybind11;
using namespace lkmdp;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Optimistic learning on linear kernel MDPs";

  py::register_exception<UnsupportedOperation>(m, "UnsupportedOperation", PyExc_NotImplementedError);
  py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("beta_radius", &beta_radius, py::arg("lam"), py::arg("d"), py::arg("gamma"), py::arg("T"), py::arg("delta"));
  m.def("u_rounds", &u_rounds, py::arg("gamma"), py::arg("T"));
  m.def("epoch_bound", &epoch_bound, py::arg("d"), py::arg("lam"), py::arg("T"), py::arg("gamma"));

  py::class_<RidgeDesign>(m, "RidgeDesign")
      .def(py::init<int, double>(), py::arg("d"), py::arg("lam"))
      .def("update", &RidgeDesign::update, py::arg("x"), py::arg("y"))
      .def("theta_hat", &RidgeDesign::theta_hat)
      .def_property_readonly("sigma", &RidgeDesign::sigma)
      .def_property_readonly("sigma_inv", &RidgeDesign::sigma_inv)
      .def_property_readonly("b", &RidgeDesign::b)
      .def_property_readonly("log_det", &RidgeDesign::log_det)
      .def("doubling_triggered",
           [](const RidgeDesign& d, double start) { return doubling_triggered(d, start); });

  py::class_<LinearKernelMdp>(m, "LinearKernelMdp")
      .def_property_readonly("family", [](const LinearKernelMdp& e) { return to_string(e.family()); })
      .def_property_readonly("n_states", &LinearKernelMdp::n_states)
      .def_property_readonly("n_actions", &LinearKernelMdp::n_actions)
      .def_property_readonly("dim", &LinearKernelMdp::dim)
      .def_property_readonly("gamma", &LinearKernelMdp::gamma)
      .def_property_readonly("rewards", &LinearKernelMdp::rewards)
      .def_property_readonly("theta_star", &LinearKernelMdp::theta_star)
      .def("features", &LinearKernelMdp::features, py::arg("s"), py::arg("a"))
      .def("transition", &LinearKernelMdp::transition, py::arg("s"), py::arg("a"))
      .def("phi_v", &LinearKernelMdp::phi_v, py::arg("V"), py::arg("s"), py::arg("a"))
      .def("b_contains", [](const LinearKernelMdp& e, const Vec& th) { return b_contains(e, th); })
      .def("validate", [](const LinearKernelMdp& e) {
        const KernelReport r = validate_kernel(e);
        py::dict out;
        out["ok"] = r.ok();
        out["max_simplex_violation"] = r.max_simplex_violation;
        out["theta_norm_slack"] = r.theta_norm_slack;
        out["phi_v_slack"] = r.phi_v_slack;
        out["flagged"] = r.flagged;
        return out;
      });

  m.def("make_tabular_env", &make_tabular_env, py::arg("P"), py::arg("rewards"), py::arg("gamma"));
  m.def(
      "make_hard_env",
      [](int d, double delta, double Delta, double gamma, const std::vector<int>& signs) {
        return make_hard_env(HardMdpParams{d, delta, Delta, gamma}, signs);
      },
      py::arg("d"), py::arg("delta"), py::arg("Delta"), py::arg("gamma"), py::arg("theta_signs"));
  m.def("env_from_json", &env_from_json, py::arg("text"));
  m.def("make_preset", &make_preset, py::arg("name"), py::arg("T") = 1000);
  m.def("list_presets", [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& p : list_presets()) out.emplace_back(p.name, p.description);
    return out;
  });

  m.def("optimal_values", [](const LinearKernelMdp& env, double tol) {
    const OptimalValues ov = optimal_values(env, tol);
    return py::make_tuple(ov.v, ov.q);
  }, py::arg("env"), py::arg("tol") = 1e-10);
  m.def("hard_mdp_closed_form", &hard_mdp_closed_form, py::arg("gamma"), py::arg("delta"), py::arg("Delta"));
  m.def("policy_value", py::overload_cast<const LinearKernelMdp&, const std::vector<ActionId>&>(&policy_value),
        py::arg("env"), py::arg("policy"));
  m.def("sc_to_regret", &sc_to_regret, py::arg("C"), py::arg("a"), py::arg("gamma"), py::arg("T"));
  m.def("loglog_slope", &loglog_slope, py::arg("points"));
  m.def("regret_lower_bound", &regret_lower_bound, py::arg("gamma"), py::arg("d"), py::arg("T"),
        py::arg("c") = default_lower_bound_constant());

  m.def(
      "run_uclk",
      [](const LinearKernelMdp& env, long T, std::uint64_t seed, double lam, double delta_conf,
         std::optional<double> beta, std::optional<int> U, bool clip, const std::string& method) {
        UclkConfig c;
        c.horizon = T;
        c.seed = seed;
        c.lambda = lam;
        c.delta_conf = delta_conf;
        c.beta = beta;
        c.rounds = U;
        c.clip = clip;
        py::gil_scoped_release release;
        RunTrace trace = run_uclk(env, c);
        RegretOptions ro;
        ro.method = regret_method_from_string(method);
        RegretTrace regret = regret_trace(trace, env, ro);
        py::gil_scoped_acquire acquire;
        std::vector<int> states, actions, epochs;
        std::vector<double> rewards;
        for (const auto& st : trace.steps) {
          states.push_back(st.state);
          actions.push_back(st.action);
          epochs.push_back(st.epoch);
          rewards.push_back(st.reward);
        }
        std::vector<long> starts;
        for (const auto& e : trace.epochs) starts.push_back(e.t_start);
        py::dict out;
        out["states"] = states;
        out["actions"] = actions;
        out["epochs"] = epochs;
        out["rewards"] = rewards;
        out["epoch_starts"] = starts;
        out["delta"] = regret.delta;
        out["cum_regret"] = regret.cumulative;
        out["beta"] = trace.beta;
        out["U"] = trace.rounds;
        return out;
      },
      py::arg("env"), py::arg("T"), py::arg("seed") = 0, py::arg("lam") = 1.0, py::arg("delta_conf") = 0.05,
      py::arg("beta") = py::none(), py::arg("U") = py::none(), py::arg("clip") = true,
      py::arg("method") = "exact-stationary");

  m.def(
      "mc_phi_v",
      [](const LinearKernelMdp& env, const Vec& V, StateId s, ActionId a, int R, std::uint64_t seed) {
        McSampler sampler(env);
        const CounterRng rng = CounterRng::from_seed(seed, Stream::kMcint);
        return mc_phi_v(sampler, [&](StateId x) { return V[x]; }, s, a, R, rng);
      },
      py::arg("env"), py::arg("V"), py::arg("s"), py::arg("a"), py::arg("R"), py::arg("seed") = 0);

  m.def("normalize_config", [](const std::string& text) { return serialize_config(parse_config(text)); },
        py::arg("text"));
  m.def(
      "run_experiment",
      [](const std::string& text, int jobs, bool reproducible) {
        const ExperimentConfig c = parse_config(text);
        ExperimentOptions o;
        o.jobs = jobs;
        o.reproducible = reproducible;
        py::gil_scoped_release release;
        const ExperimentResult r = run_experiment(c, o);
        return r.failed;
      },
      py::arg("config_text"), py::arg("jobs") = 1, py::arg("reproducible") = true);
}

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rtidp/bench.h"
#include "rtidp/config.h"
#include "rtidp/contract.h"
#include "rtidp/dataset.h"
#include "rtidp/envs.h"
#include "rtidp/net.h"
#include "rtidp/policy.h"
#include "rtidp/sampler.h"
#include "rtidp/schedule.h"

namespace py = pybind11;
using namespace rtidp;

namespace {

Policy LoadPolicy(const std::string& path) { return LoadCheckpoint(path); }

Chunk SampleFull(const Policy& p, const Vec& cond, uint64_t seed,
                 bool deterministic_final) {
  std::mt19937_64 rng(seed);
  return FullDenoise(p.model, cond, p.schedule, rng,
                     {deterministic_final, false});
}

Chunk SampleTruncated(const Policy& p, const Vec& cond, const Chunk& guess,
                      const std::vector<int>& steps, uint64_t seed,
                      bool deterministic_final, bool renoise) {
  std::mt19937_64 rng(seed);
  return TruncatedDenoise(p.model, cond, guess, steps, p.schedule, rng,
                          {deterministic_final, renoise});
}

py::dict EpisodeToDict(const EpisodeResult& r) {
  py::dict d;
  d["score"] = r.score;
  d["n_predictions"] = r.n_predictions;
  d["env_steps"] = r.env_steps;
  d["latencies_us"] = r.latencies_us;
  d["modes"] = r.modes;
  d["mode_switches"] = r.mode_switches;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Diffusion policy inference with real-time iteration warm starts";

  py::register_exception<NumericalError>(m, "NumericalError",
                                         PyExc_ArithmeticError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<NoiseSchedule>(m, "NoiseSchedule")
      .def_property_readonly("total_steps", &NoiseSchedule::total_steps)
      .def_property_readonly(
          "kind", [](const NoiseSchedule& s) { return std::string(ToString(s.kind())); })
      .def_property_readonly("betas", &NoiseSchedule::betas)
      .def_property_readonly("alphas", &NoiseSchedule::alphas)
      .def_property_readonly("alpha_bars", &NoiseSchedule::alpha_bars)
      .def_property_readonly("sigmas", &NoiseSchedule::sigmas)
      .def("to_csv", &NoiseSchedule::ToCsv);
  m.def(
      "make_schedule",
      [](const std::string& kind, int k) {
        return MakeSchedule(ParseScheduleKind(kind), k);
      },
      py::arg("kind") = "squared_cosine", py::arg("total_steps") = 100);
  m.def("compute_ck", &ComputeCk, py::arg("schedule"), py::arg("L"),
        py::arg("k"));
  m.def("compute_c", &ComputeC, py::arg("schedule"), py::arg("L"),
        py::arg("kprime"));

  py::class_<Env>(m, "Env")
      .def_property_readonly("name", [](const Env& e) { return e.spec().name; })
      .def_property_readonly("obs_dim", [](const Env& e) { return e.spec().obs_dim; })
      .def_property_readonly("action_dim",
                             [](const Env& e) { return e.spec().action_dim; })
      .def_property_readonly("discrete_mask",
                             [](const Env& e) { return e.spec().discrete_mask; })
      .def_property_readonly("episode_cap",
                             [](const Env& e) { return e.spec().episode_cap; })
      .def("reset", &Env::Reset, py::arg("seed"))
      .def("step", &Env::Step, py::arg("action"))
      .def("observe", &Env::Observe)
      .def("score", &Env::Score)
      .def("expert_action", &Env::ExpertAction)
      .def_property_readonly("t", &Env::t);
  m.def("make_env", &MakeEnv, py::arg("name"), py::arg("seed") = 0);
  m.def("env_names", &EnvNames);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("env_name", &Dataset::env_name)
      .def_readonly("horizon", &Dataset::horizon)
      .def_readonly("obs_dim", &Dataset::obs_dim)
      .def_readonly("action_dim", &Dataset::action_dim)
      .def_readonly("discrete_scale", &Dataset::discrete_scale)
      .def_readonly("discarded", &Dataset::discarded)
      .def_property_readonly("n_episodes",
                             [](const Dataset& d) { return d.episodes.size(); })
      .def("num_pairs", &Dataset::NumPairs)
      .def("to_csv", &DatasetToCsv)
      .def("serialize", [](const Dataset& d) { return py::bytes(SerializeDataset(d)); });
  m.def("generate_demos",
        [](const std::string& env, int n, uint64_t seed) {
          return GenerateDemos(env, n, seed);
        },
        py::arg("env"), py::arg("n_episodes"), py::arg("seed") = 0);
  m.def("scale_dataset_discrete", &ScaleDatasetDiscrete, py::arg("data"),
        py::arg("factor"));
  m.def("save_dataset", &SaveDataset);
  m.def("load_dataset", &LoadDataset);
  m.def("deserialize_dataset",
        [](const py::bytes& b) { return DeserializeDataset(std::string(b)); });

  py::class_<Policy>(m, "Policy")
      .def_readonly("env_name", &Policy::env_name)
      .def_readonly("schedule", &Policy::schedule)
      .def_property_readonly("horizon",
                             [](const Policy& p) { return p.model.config().horizon; })
      .def_property_readonly(
          "action_dim", [](const Policy& p) { return p.model.config().action_dim; })
      .def_property_readonly("cond_dim",
                             [](const Policy& p) { return p.model.config().cond_dim(); })
      .def("predict_noise",
           [](const Policy& p, const Chunk& a, int k, const Vec& cond) {
             return p.model.Forward(a, k, cond);
           },
           py::arg("noisy"), py::arg("k"), py::arg("cond"))
      .def("full_denoise", &SampleFull, py::arg("cond"), py::arg("seed") = 0,
           py::arg("deterministic_final") = true)
      .def("truncated_denoise", &SampleTruncated, py::arg("cond"),
           py::arg("guess"), py::arg("steps"), py::arg("seed") = 0,
           py::arg("deterministic_final") = true, py::arg("renoise") = false)
      .def("serialize",
           [](const Policy& p) { return py::bytes(SerializeCheckpoint(p)); });
  m.def("train_policy",
        [](const Dataset& data, std::vector<int> hidden, int epochs,
           double learning_rate, uint64_t seed, int total_steps) {
          ModelConfig mc;
          mc.hidden = std::move(hidden);
          TrainConfig tc;
          tc.epochs = epochs;
          tc.learning_rate = learning_rate;
          tc.seed = seed;
          return TrainPolicy(data, mc, ScheduleKind::kSquaredCosine,
                             total_steps, tc);
        },
        py::arg("data"), py::arg("hidden") = std::vector<int>{256, 256, 256},
        py::arg("epochs") = 150, py::arg("learning_rate") = 0.2,
        py::arg("seed") = 0, py::arg("total_steps") = 100);
  m.def("load_checkpoint", &LoadPolicy);
  m.def("save_checkpoint", &SaveCheckpoint);
  m.def("deserialize_checkpoint",
        [](const py::bytes& b) { return DeserializeCheckpoint(std::string(b)); });
  m.def("git_blob_hash",
        [](const py::bytes& b) { return GitBlobHash(std::string(b)); });

  m.def("shift_guess", &ShiftGuess);
  m.def("rti_rollout",
        [](Env& env, const Policy& p, std::vector<int> steps, uint64_t seed,
           double discrete_guess_factor, int episode_cap) {
          SamplerConfig c;
          c.rti_steps = std::move(steps);
          c.discrete_guess_factor = discrete_guess_factor;
          return EpisodeToDict(RtiRollout(env, p, c, episode_cap, seed));
        },
        py::arg("env"), py::arg("policy"),
        py::arg("steps") = std::vector<int>{3, 2, 1}, py::arg("seed") = 0,
        py::arg("discrete_guess_factor") = 1.0, py::arg("episode_cap") = 0);
  m.def("dp_rollout",
        [](Env& env, const Policy& p, int executed, uint64_t seed,
           int episode_cap) {
          return EpisodeToDict(DpRollout(env, p, executed, episode_cap, seed));
        },
        py::arg("env"), py::arg("policy"), py::arg("executed") = 4,
        py::arg("seed") = 0, py::arg("episode_cap") = 0);

  m.def("estimate_lipschitz",
        [](const Policy& p, const Dataset& data, int n_pairs, double scale,
           int power_iterations, uint64_t seed) {
          LipschitzOptions o;
          o.n_pairs = n_pairs;
          o.perturbation_scale = scale;
          o.power_iterations = power_iterations;
          o.seed = seed;
          const std::vector<TrainPair> pairs = MakeTrainPairs(data);
          return EstimateLipschitz(p.model, p.schedule, pairs, o).L;
        },
        py::arg("policy"), py::arg("data"), py::arg("n_pairs") = 500,
        py::arg("scale") = 1e-3, py::arg("power_iterations") = 3,
        py::arg("seed") = 0);
  m.def("estimate_kprime",
        [](const Policy& p, const Dataset& data, std::vector<int> candidates,
           int n_transitions, uint64_t seed) {
          KprimeOptions o;
          o.candidates = std::move(candidates);
          o.n_transitions = n_transitions;
          o.seed = seed;
          const KprimeEstimate e = EstimateKprime(p, data, o);
          return py::make_tuple(e.chosen, e.mean_deviation);
        },
        py::arg("policy"), py::arg("data"),
        py::arg("candidates") = std::vector<int>{1, 2, 3, 5, 10},
        py::arg("n_transitions") = 100, py::arg("seed") = 0);

  m.def("parse_bench_csv",
        [](const std::string& text) {
          py::list rows;
          for (const BenchRow& r : ParseBenchCsv(text)) {
            py::dict d;
            d["variant"] = std::string(ToString(r.variant));
            d["env"] = r.env;
            d["seed"] = r.seed;
            d["episode"] = r.episode;
            d["score"] = r.score;
            d["n_predictions"] = r.n_predictions;
            d["latency_us_median"] = r.latency_us_median;
            d["latency_us_p95"] = r.latency_us_p95;
            d["rti_steps"] = r.rti_steps;
            d["speedup_vs_full"] = r.speedup_vs_full;
            rows.append(d);
          }
          return rows;
        });
  m.def("config_keys", &ConfigKeys);
  m.def("format_default_config", [] { return FormatRunConfig(RunConfig{}); });
}

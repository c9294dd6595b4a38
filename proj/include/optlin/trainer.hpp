#ifndef OPTLIN_TRAINER_HPP
#define OPTLIN_TRAINER_HPP

// Mini-batch stochastic gradient descent over (M, gamma, b).

#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "optlin/errors.hpp"
#include "optlin/grid_model.hpp"
#include "optlin/lin_coeffs.hpp"
#include "optlin/parallel.hpp"
#include "optlin/sensitivity.hpp"

namespace optlin {

struct TrainConfig {
  std::size_t scenario_count = 64;  // S
  std::size_t batch_size = 8;       // B
  int iterations = 100;             // T
  double alpha0 = 1e-3;
  double w = 10.0;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // 0 disables periodic checkpoints
  GroupScale scale;
  double epsilon = 1e-8;
  unsigned jobs = 0;
  int halt_after = 0;  // stop this invocation after t reaches this value (0 = run to T)

  void validate(std::size_t available) const {
    if (scenario_count != available) {
      throw Error(ErrorKind::InvalidConfig, "config expects " + std::to_string(scenario_count) + " scenarios, got " +
                                                std::to_string(available));
    }
    if (batch_size < 1 || batch_size > scenario_count) throw Error(ErrorKind::InvalidConfig, "need 1 <= B <= S");
    if (iterations < 1) throw Error(ErrorKind::InvalidConfig, "need T >= 1");
    if (!(alpha0 > 0)) throw Error(ErrorKind::InvalidConfig, "need alpha0 > 0");
    if (!(w >= 0)) throw Error(ErrorKind::InvalidConfig, "need w >= 0");
    if (checkpoint_every < 0 || halt_after < 0) throw Error(ErrorKind::InvalidConfig, "negative iteration count");
  }
};

struct IterationRecord {
  int iteration = 0;
  double mean_loss = 0;  // mean over evaluated batch scenarios, before the update
  double step = 0;
  int skipped = 0;
  std::string checkpoint;  // reference returned by the checkpoint sink, if any
};

struct TrainTrace {
  std::vector<IterationRecord> records;
  std::vector<std::string> skip_log;  // "t=<iter> s=<scenario>: <error>"
};

struct TrainResult {
  LinCoeffs psi;
  TrainTrace trace;
  int next_iteration = 1;
};

/// Receives periodic checkpoints and returns a reference recorded in the trace.
using CheckpointSink = std::function<std::string(const PsiCheckpoint&)>;

/// Decayed step for iteration t of T: alpha0 * (T - t) / T.
inline double step_size(double alpha0, int t, int horizon) {
  return alpha0 * static_cast<double>(horizon - t) / static_cast<double>(horizon);
}

/// Uniform sample of B distinct indices from [0, S), a pure function of
/// (seed, t) so that resumed runs draw the same batches.
inline std::vector<std::size_t> sample_batch(std::size_t S, std::size_t B, std::uint64_t seed, int t) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(t)};
  std::mt19937_64 eng(seq);
  std::vector<std::size_t> idx(S);
  for (std::size_t i = 0; i < S; ++i) idx[i] = i;
  for (std::size_t i = 0; i < B; ++i) {
    // unbiased integer in [i, S) by rejection
    const std::uint64_t range = S - i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
    std::uint64_t r;
    do r = eng();
    while (r >= limit);
    std::swap(idx[i], idx[i + std::size_t(r % range)]);
  }
  idx.resize(B);
  return idx;
}

namespace detail {

inline bool skippable(ErrorKind k) {
  switch (k) {
    case ErrorKind::SingularGamma:
    case ErrorKind::SingularJacobian:
    case ErrorKind::Infeasible:
    case ErrorKind::NonConvergence:
    case ErrorKind::MaxIterations:
      return true;
    default:
      return false;
  }
}

inline TrainResult run_training(const NetworkCase& net, const std::vector<DemandScenario>& scenarios,
                                const TrainConfig& cfg, LinCoeffs psi, int first, const CheckpointSink& sink) {
  const int T = cfg.iterations;
  const int last = cfg.halt_after > 0 ? std::min(cfg.halt_after, T) : T;
  PipelineOptions popt;
  popt.epsilon = cfg.epsilon;
  const std::string fp = net.fingerprint();

  TrainResult res;
  for (int t = first; t <= last; ++t) {
    const double step = step_size(cfg.alpha0, t, T);
    const auto batch = sample_batch(cfg.scenario_count, cfg.batch_size, cfg.seed, t);

    std::vector<std::optional<ScenarioGradient>> out(batch.size());
    std::vector<std::string> failures(batch.size());
    std::vector<ErrorKind> kinds(batch.size(), ErrorKind::Io);
    parallel_for(batch.size(), cfg.jobs, [&](std::size_t i) {
      try {
        out[i] = scenario_gradient(net, psi, scenarios[batch[i]], cfg.w, popt);
      } catch (const Error& e) {
        if (!skippable(e.kind())) throw;
        failures[i] = e.what();
        kinds[i] = e.kind();
      }
    });

    LinCoeffs delta = LinCoeffs::zeros(psi.M.rows(), psi.M.cols());
    double loss_sum = 0;
    int ok = 0;
    IterationRecord rec;
    rec.iteration = t;
    rec.step = step;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (!out[i]) {
        ++rec.skipped;
        res.trace.skip_log.push_back("t=" + std::to_string(t) + " s=" + std::to_string(batch[i]) + ": " + failures[i]);
        continue;
      }
      delta += out[i]->grads;
      loss_sum += out[i]->loss;
      ++ok;
    }
    if (ok == 0) {
      throw Error(ErrorKind::AllScenariosDegenerate,
                  "iteration " + std::to_string(t) + ": every batch scenario failed; first: " + failures.front());
    }
    rec.mean_loss = loss_sum / ok;
    psi = apply_update(psi, delta, step, static_cast<double>(ok), cfg.scale);
    if (!psi.all_finite()) throw Error(ErrorKind::NonConvergence, "coefficients diverged at iteration " + std::to_string(t));

    if (sink && cfg.checkpoint_every > 0 && t % cfg.checkpoint_every == 0) {
      rec.checkpoint = sink(PsiCheckpoint{psi, fp, t + 1, T});
    }
    res.trace.records.push_back(std::move(rec));
  }
  res.psi = std::move(psi);
  res.next_iteration = std::max(first, last + 1);
  return res;
}

}  // namespace detail

/// Runs SGD from the classical initialization.
inline TrainResult train(const NetworkCase& net, const std::vector<DemandScenario>& scenarios, const TrainConfig& cfg,
                         const CheckpointSink& sink = {}) {
  cfg.validate(scenarios.size());
  return detail::run_training(net, scenarios, cfg, init_classical(net), 1, sink);
}

/// Continues a run from a checkpoint with the same schedule.
inline TrainResult resume(const PsiCheckpoint& ck, const NetworkCase& net, const std::vector<DemandScenario>& scenarios,
                          const TrainConfig& cfg, const CheckpointSink& sink = {}) {
  require_matching_case(ck, net);
  cfg.validate(scenarios.size());
  if (ck.horizon != 0 && ck.horizon != cfg.iterations) {
    throw Error(ErrorKind::InvalidConfig, "checkpoint was produced with T=" + std::to_string(ck.horizon));
  }
  if (ck.next_iteration > cfg.iterations) {
    TrainResult res;
    res.psi = ck.psi;
    res.next_iteration = ck.next_iteration;
    return res;
  }
  return detail::run_training(net, scenarios, cfg, ck.psi, std::max(1, ck.next_iteration), sink);
}

/// Reads a config from JSON or from "key = value" lines ('#' starts a comment).
/// Keys: S, B, T, alpha0, w, seed, checkpoint_every, scale_m, scale_gamma,
/// scale_b, epsilon, jobs, halt_after. Unknown keys are rejected.
inline TrainConfig parse_train_config(std::string_view text) {
  nlohmann::json j = nlohmann::json::object();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') {
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::InvalidConfig, e.what());
    }
  } else {
    std::size_t pos = 0;
    int line_no = 0;
    while (pos <= text.size()) {
      auto end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
      line = detail::trim(line);
      if (line.empty() || line.front() == '[') continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(line_no) + ": expected key = value");
      }
      const std::string key(detail::trim(line.substr(0, eq)));
      const std::string val(detail::trim(line.substr(eq + 1)));
      const auto num = detail::parse_number(val);
      if (!num) throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(line_no) + ": bad number for " + key);
      j[key] = *num;
    }
  }
  TrainConfig c;
  for (const auto& [key, v] : j.items()) {
    if (!v.is_number()) throw Error(ErrorKind::InvalidConfig, key + " must be a number");
    const double x = v.get<double>();
    auto count = [&]() -> long long {
      if (x < 0 || x != std::floor(x)) throw Error(ErrorKind::InvalidConfig, key + " must be a non-negative integer");
      return static_cast<long long>(x);
    };
    if (key == "S") c.scenario_count = std::size_t(count());
    else if (key == "B") c.batch_size = std::size_t(count());
    else if (key == "T") c.iterations = int(count());
    else if (key == "alpha0") c.alpha0 = x;
    else if (key == "w") c.w = x;
    else if (key == "seed") c.seed = v.is_number_unsigned() ? v.get<std::uint64_t>() : std::uint64_t(count());
    else if (key == "checkpoint_every") c.checkpoint_every = int(count());
    else if (key == "scale_m") c.scale.m = x;
    else if (key == "scale_gamma") c.scale.gamma = x;
    else if (key == "scale_b") c.scale.b = x;
    else if (key == "epsilon") c.epsilon = x;
    else if (key == "jobs") c.jobs = unsigned(count());
    else if (key == "halt_after") c.halt_after = int(count());
    else throw Error(ErrorKind::InvalidConfig, "unknown config key " + key);
  }
  return c;
}

inline void write_trace_csv(std::ostream& out, const TrainTrace& trace) {
  out << "iteration,loss,step,skips\n";
  out.precision(17);
  for (const auto& r : trace.records) out << r.iteration << ',' << r.mean_loss << ',' << r.step << ',' << r.skipped << '\n';
}

}  // namespace optlin

#endif  // OPTLIN_TRAINER_HPP

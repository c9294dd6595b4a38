// optlin command-line tool.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "optlin/optlin.hpp"

namespace {

using namespace optlin;
namespace fs = std::filesystem;

void write_json(const std::string& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

bool wants_json(const std::string& path, const std::string& to) {
  if (to == "json") return true;
  if (to == "matpower") return false;
  return fs::path(path).extension() == ".json";
}

LinCoeffs psi_or_classical(const std::string& path, const NetworkCase& net) {
  if (path.empty()) return init_classical(net);
  const PsiCheckpoint ck = load_psi(path);
  require_matching_case(ck, net);
  return ck.psi;
}

DemandScenario demand_or_nominal(const std::string& path, const NetworkCase& net) {
  if (path.empty()) return net.nominal_demand();
  return demand_from_json(net, read_json(path));
}

std::vector<DemandScenario> scenarios_or_sample(const std::string& path, const NetworkCase& net, std::size_t count,
                                                std::uint64_t seed) {
  if (!path.empty()) return scenarios_from_json(net, read_json(path));
  return sample_scenarios(net, count, seed);
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream ss;
  ss << std::setprecision(prec) << v;
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Application-informed DC OPF linearization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "optlin 1.0");

  // convert
  std::string conv_in, conv_out, conv_to;
  auto* convert = app.add_subcommand("convert", "Convert a case between MATPOWER m-file and JSON");
  convert->add_option("--in", conv_in, "Input case (m-file or JSON)")->required()->check(CLI::ExistingFile);
  convert->add_option("--out", conv_out, "Output path")->required();
  convert->add_option("--to", conv_to, "Output format (default from extension)")->check(CLI::IsMember({"json", "matpower"}));

  // sample
  std::string samp_case, samp_out;
  std::size_t samp_count = 64;
  std::uint64_t samp_seed = 0;
  double samp_low = 0.9, samp_high = 1.1;
  auto* sample = app.add_subcommand("sample", "Draw demand scenarios by uniform per-bus scaling");
  sample->add_option("--case", samp_case, "Case file")->required()->check(CLI::ExistingFile);
  sample->add_option("--count", samp_count, "Number of scenarios")->capture_default_str();
  sample->add_option("--seed", samp_seed, "RNG seed")->capture_default_str();
  sample->add_option("--low", samp_low, "Lower scaling bound")->capture_default_str();
  sample->add_option("--high", samp_high, "Upper scaling bound")->capture_default_str();
  sample->add_option("--out", samp_out, "Output scenario JSON")->required();

  // solve-dcopf
  std::string dc_case, dc_psi, dc_demand, dc_out;
  double dc_eps = 1e-8;
  auto* solve_dc = app.add_subcommand("solve-dcopf", "Solve the parameterized DC OPF");
  solve_dc->add_option("--case", dc_case, "Case file")->required()->check(CLI::ExistingFile);
  solve_dc->add_option("--psi", dc_psi, "Coefficient file (default: classical)")->check(CLI::ExistingFile);
  solve_dc->add_option("--demand", dc_demand, "Demand JSON (default: case loads)")->check(CLI::ExistingFile);
  solve_dc->add_option("--epsilon", dc_eps, "Regularization on angles and flows")->capture_default_str();
  solve_dc->add_option("--out", dc_out, "Output JSON")->required();

  // solve-pf
  std::string pf_case, pf_dispatch, pf_demand, pf_out;
  PfOptions pf_opt;
  auto* solve_ac = app.add_subcommand("solve-pf", "Solve the distributed-slack AC power flow");
  solve_ac->add_option("--case", pf_case, "Case file")->required()->check(CLI::ExistingFile);
  solve_ac->add_option("--dispatch", pf_dispatch, "Dispatch JSON")->required()->check(CLI::ExistingFile);
  solve_ac->add_option("--demand", pf_demand, "Demand JSON (default: embedded or case loads)")->check(CLI::ExistingFile);
  solve_ac->add_option("--tol", pf_opt.tolerance, "Residual tolerance (p.u.)")->capture_default_str();
  solve_ac->add_option("--max-iter", pf_opt.max_iterations, "Newton iteration cap")->capture_default_str();
  solve_ac->add_option("--out", pf_out, "Output JSON")->required();

  // train
  std::string tr_case, tr_config, tr_out, tr_trace, tr_scen, tr_resume, tr_ckdir, tr_skiplog;
  std::optional<double> tr_alpha0, tr_w;
  std::optional<std::uint64_t> tr_seed;
  std::optional<int> tr_iters, tr_halt;
  unsigned tr_jobs = 0;
  auto* train_cmd = app.add_subcommand("train", "Train linearization coefficients by SGD");
  train_cmd->add_option("--case", tr_case, "Case file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--config", tr_config, "Config file (JSON or key = value)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out-psi", tr_out, "Output coefficient file")->required();
  train_cmd->add_option("--trace", tr_trace, "Output trace CSV")->required();
  train_cmd->add_option("--scenarios", tr_scen, "Training scenarios (default: sampled with the seed)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--resume", tr_resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  train_cmd->add_option("--checkpoint-dir", tr_ckdir, "Directory for periodic checkpoints");
  train_cmd->add_option("--skip-log", tr_skiplog, "Write skipped scenarios to this file");
  train_cmd->add_option("--alpha0", tr_alpha0, "Override initial step size");
  train_cmd->add_option("--w", tr_w, "Override violation weight");
  train_cmd->add_option("--seed", tr_seed, "Override seed");
  train_cmd->add_option("--iterations", tr_iters, "Override T");
  train_cmd->add_option("--halt-after", tr_halt, "Stop after this iteration (resumable)");
  train_cmd->add_option("--jobs", tr_jobs, "Parallel scenarios (0 = all cores)");

  // eval
  std::string ev_case, ev_psi, ev_scen, ev_ref, ev_csv, ev_summary;
  unsigned ev_jobs = 0;
  PipelineOptions ev_opt;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate coefficients on a scenario set");
  eval_cmd->add_option("--case", ev_case, "Case file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--psi", ev_psi, "Coefficient file (default: classical)")->check(CLI::ExistingFile);
  eval_cmd->add_option("--scenarios", ev_scen, "Scenario JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--reference", ev_ref, "Reference dispatch JSON")->check(CLI::ExistingFile);
  eval_cmd->add_option("--out-csv", ev_csv, "Per-scenario CSV")->required();
  eval_cmd->add_option("--summary", ev_summary, "Summary JSON");
  eval_cmd->add_option("--jobs", ev_jobs, "Parallel scenarios (0 = all cores)");
  eval_cmd->add_option("--epsilon", ev_opt.epsilon, "Regularization on angles and flows")->capture_default_str();
  eval_cmd->add_option("--pf-tol", ev_opt.pf.tolerance, "Power-flow residual tolerance (p.u.)")->capture_default_str();

  // check-grad
  std::string cg_case, cg_psi;
  double cg_w = 10.0, cg_h = 1e-6, cg_tol = 1e-4, cg_max_excluded = 0.05;
  auto* check_grad = app.add_subcommand("check-grad", "Compare analytic gradients with finite differences");
  check_grad->add_option("--case", cg_case, "Case file")->required()->check(CLI::ExistingFile);
  check_grad->add_option("--psi", cg_psi, "Coefficient file (default: classical)")->check(CLI::ExistingFile);
  check_grad->add_option("--w", cg_w, "Violation weight")->capture_default_str();
  check_grad->add_option("--step", cg_h, "Finite-difference step")->capture_default_str();
  check_grad->add_option("--tol", cg_tol, "Median relative error bound")->capture_default_str();
  check_grad->add_option("--max-excluded", cg_max_excluded, "Allowed excluded fraction")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*convert) {
      const NetworkCase net = load_case(conv_in);
      const MatpowerData data = to_matpower(net);
      if (wants_json(conv_out, conv_to)) write_json(conv_out, to_json(data));
      else write_file(conv_out, to_matpower_text(data, fs::path(conv_out).stem().string()));
    } else if (*sample) {
      const NetworkCase net = load_case(samp_case);
      write_json(samp_out, scenarios_to_json(net, sample_scenarios(net, samp_count, samp_seed, {samp_low, samp_high})));
    } else if (*solve_dc) {
      const NetworkCase net = load_case(dc_case);
      const QpCanonical qp = assemble(net, psi_or_classical(dc_psi, net), demand_or_nominal(dc_demand, net), dc_eps);
      write_json(dc_out, dcopf_to_json(net, qp, solve(qp)));
    } else if (*solve_ac) {
      const NetworkCase net = load_case(pf_case);
      const DispatchInput in = dispatch_from_json(net, read_json(pf_dispatch));
      const DemandScenario d = !pf_demand.empty() ? demand_or_nominal(pf_demand, net)
                                                  : in.demand.value_or(net.nominal_demand());
      write_json(pf_out, pf_to_json(net, solve_pf(make_setpoint(net, in.pg, d), net, pf_opt)));
    } else if (*train_cmd) {
      const NetworkCase net = load_case(tr_case);
      TrainConfig cfg = parse_train_config(read_file(tr_config));
      if (tr_alpha0) cfg.alpha0 = *tr_alpha0;
      if (tr_w) cfg.w = *tr_w;
      if (tr_seed) cfg.seed = *tr_seed;
      if (tr_iters) cfg.iterations = *tr_iters;
      if (tr_halt) cfg.halt_after = *tr_halt;
      if (train_cmd->count("--jobs")) cfg.jobs = tr_jobs;
      const auto scenarios = scenarios_or_sample(tr_scen, net, cfg.scenario_count, cfg.seed);
      CheckpointSink sink;
      if (!tr_ckdir.empty()) {
        fs::create_directories(tr_ckdir);
        sink = [&](const PsiCheckpoint& ck) {
          std::ostringstream name;
          name << "psi_" << std::setw(6) << std::setfill('0') << (ck.next_iteration - 1) << ".json";
          const std::string path = (fs::path(tr_ckdir) / name.str()).string();
          write_json(path, to_json(ck));
          return path;
        };
      }
      const TrainResult res = tr_resume.empty() ? train(net, scenarios, cfg, sink)
                                                : resume(load_psi(tr_resume), net, scenarios, cfg, sink);
      write_json(tr_out, to_json(PsiCheckpoint{res.psi, net.fingerprint(), res.next_iteration, cfg.iterations}));
      std::ostringstream trace;
      write_trace_csv(trace, res.trace);
      write_file(tr_trace, trace.str());
      if (!tr_skiplog.empty()) {
        std::string log;
        for (const auto& s : res.trace.skip_log) log += s + "\n";
        write_file(tr_skiplog, log);
      }
      if (!res.trace.records.empty()) {
        std::cout << "iterations " << res.trace.records.front().iteration << ".." << res.trace.records.back().iteration
                  << "  loss " << fmt(res.trace.records.front().mean_loss) << " -> "
                  << fmt(res.trace.records.back().mean_loss) << "  skipped " << res.trace.skip_log.size() << "\n";
      }
    } else if (*eval_cmd) {
      const NetworkCase net = load_case(ev_case);
      const LinCoeffs psi = psi_or_classical(ev_psi, net);
      const auto scenarios = scenarios_from_json(net, read_json(ev_scen));
      std::vector<std::optional<VectorXd>> refs;
      if (!ev_ref.empty()) refs = references_from_json(net, read_json(ev_ref));
      const EvalResult res = evaluate(net, psi, scenarios, refs, ev_jobs, ev_opt);
      std::ostringstream csv;
      write_eval_csv(csv, res);
      write_file(ev_csv, csv.str());
      json summary = nullptr;
      if (res.summary) {
        const auto& s = *res.summary;
        summary = {{"count", s.count},
                   {"failures", s.failures},
                   {"with_reference", s.with_reference},
                   {"mean_cost_usd", s.mean_cost_usd},
                   {"mean_cost_increase_pct", s.with_reference ? json(s.mean_cost_increase_pct) : json(nullptr)},
                   {"mean_avg_gen_viol_mw", s.mean_avg_gen_viol_mw},
                   {"mean_avg_flow_viol_mw", s.mean_avg_flow_viol_mw},
                   {"mean_total_violation_mw", s.mean_total_violation_mw}};
      }
      if (!ev_summary.empty()) write_json(ev_summary, summary);
      std::cout << summary.dump(2) << "\n";
    } else if (*check_grad) {
      const NetworkCase net = load_case(cg_case);
      const LinCoeffs psi = psi_or_classical(cg_psi, net);
      PipelineOptions opt;
      opt.pf.tolerance = 1e-13;
      const PsiGradCheck rep = check_psi_gradient(net, psi, net.nominal_demand(), cg_w, cg_h, opt);
      std::cout << std::left << std::setw(8) << "group" << std::setw(10) << "index" << std::setw(16) << "analytic"
                << std::setw(16) << "numeric" << std::setw(12) << "rel_err" << "note\n";
      for (const auto& c : rep.coords) {
        std::string idx = std::to_string(c.row);
        if (c.group == PsiGroup::M) idx += "," + std::to_string(c.col);
        std::cout << std::setw(8) << group_name(c.group) << std::setw(10) << idx << std::setw(16) << fmt(c.analytic, 9)
                  << std::setw(16) << fmt(c.numeric, 9) << std::setw(12) << fmt(c.rel_error, 3)
                  << (c.excluded ? "excluded: " + c.reason : "") << "\n";
      }
      const bool pass = rep.median_rel_error <= cg_tol && rep.excluded_fraction() < cg_max_excluded;
      std::cout << "median rel err " << fmt(rep.median_rel_error, 3) << ", max rel err " << fmt(rep.max_rel_error, 3)
                << ", excluded " << rep.num_excluded << "/" << rep.coords.size() << "  " << (pass ? "PASS" : "FAIL")
                << "\n";
      return pass ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", std::string(to_string(e.kind()))}, {"message", e.detail()}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "Io"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}

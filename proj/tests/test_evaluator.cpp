#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace optlin;
using testing_support::data_case;
using testing_support::two_bus_text;

namespace {

PfSteadyState state_with(double pg, double pf) {
  PfSteadyState st;
  st.p_g_bar = VectorXd::Constant(1, pg);
  st.p_f_bar = VectorXd::Constant(1, pf);
  return st;
}

NetworkCase with_scaled_cost(const NetworkCase& net, double k) {
  NetworkCase out = net;
  for (auto& g : out.gens) g.c2 *= k;
  return out;
}

}  // namespace

TEST(Loss, FeasibleStateCostsOnly) {
  const NetworkCase net = parse_case(two_bus_text(0.01, 0.1, 150, 200, 100, 0.01));
  const LossReport rep = loss_of(state_with(1.0, 0.99), net, 10);
  EXPECT_DOUBLE_EQ(rep.cost, 1.0);  // 0.01 $/MW^2h * 100 MVA
  EXPECT_EQ(rep.total_violation_mw(), 0.0);
  EXPECT_DOUBLE_EQ(rep.loss, rep.cost);
  EXPECT_DOUBLE_EQ(rep.cost_usd(net.base_mva), 100.0);  // 0.01 * 100^2
}

TEST(Loss, HandComputedPenalty) {
  const NetworkCase net = parse_case(two_bus_text(0.01, 0.1, 150, 120, 100, 0.01));
  const LossReport rep = loss_of(state_with(1.25, 1.0), net, 10);
  EXPECT_DOUBLE_EQ(rep.cost, 1.5625);
  EXPECT_NEAR(rep.gen_violations[0], 5.0, 1e-12);
  EXPECT_NEAR(rep.loss, 1.5625 + 10 * 5.0 / 100, 1e-12);
}

TEST(Loss, ReverseFlowViolation) {
  const NetworkCase net = parse_case(two_bus_text(0.01, 0.1, 150));
  const LossReport rep = loss_of(state_with(1.0, -(1.5 + 0.001)), net, 10);
  EXPECT_NEAR(rep.flow_violations[0], 0.1, 1e-9);
  EXPECT_EQ(loss_of(state_with(1.0, -1.5), net, 10).flow_violations[0], 0.0);
}

TEST(Loss, MonotoneInWeight) {
  const NetworkCase net = parse_case(two_bus_text(0.01, 0.1, 150, 120));
  double prev = -1;
  for (double w : {0.0, 1.0, 10.0, 50.0, 100.0}) {
    const double l = loss_of(state_with(1.3, 1.0), net, w).loss;
    EXPECT_GT(l, prev);
    prev = l;
  }
}

TEST(CostIncrease, MatchesDefinition) {
  const NetworkCase net = data_case("case39.m");
  const VectorXd ref = VectorXd::LinSpaced(Eigen::Index(net.num_gens()), 1.0, 5.0);
  EXPECT_EQ(cost_increase_pct(net, ref, ref), 0.0);
  const VectorXd p = ref * 1.1;
  EXPECT_NEAR(cost_increase_pct(net, p, ref), 21.0, 1e-10);
  EXPECT_NEAR(cost_increase_pct(net, ref * 0.9, ref), -19.0, 1e-10);
  EXPECT_NEAR(cost_increase_pct(with_scaled_cost(net, 2.0), p, ref), cost_increase_pct(net, p, ref), 1e-12);
  EXPECT_NEAR(dispatch_deviation_pct(net, p, ref), 1.0, 1e-10);
}

TEST(Evaluator, ReferenceEqualToSteadyStateGivesZero) {
  const NetworkCase net = data_case("case39.m");
  const auto set = sample_scenarios(net, 3, 8);
  const LinCoeffs psi = init_classical(net);
  std::vector<std::optional<VectorXd>> refs;
  for (const auto& d : set) refs.push_back(forward(net, psi, d, 0).state.p_g_bar);
  refs[1].reset();
  const EvalResult res = evaluate(net, psi, set, refs, 1);
  ASSERT_TRUE(res.summary);
  EXPECT_EQ(res.summary->with_reference, 2u);
  EXPECT_EQ(*res.records[0].cost_increase_pct, 0.0);
  EXPECT_FALSE(res.records[1].cost_increase_pct);
  EXPECT_EQ(res.summary->mean_cost_increase_pct, 0.0);
}

TEST(Evaluator, EmptyScenarioSet) {
  const NetworkCase net = data_case("case3.m");
  const EvalResult res = evaluate(net, init_classical(net), {});
  EXPECT_TRUE(res.records.empty());
  EXPECT_FALSE(res.summary);
  std::ostringstream csv;
  write_eval_csv(csv, res);
  EXPECT_EQ(csv.str(), "scenario_id,cost,cost_increase_pct,n_gen_viol,avg_gen_viol_mw,n_flow_viol,avg_flow_viol_mw\n");
}

TEST(Evaluator, FailuresAreRecordedNotFatal) {
  const NetworkCase net = data_case("case3.m");
  auto set = sample_scenarios(net, 3, 8);
  set[2].p_d *= 5.0;
  const EvalResult res = evaluate(net, init_classical(net), set, {}, 2);
  EXPECT_TRUE(res.records[0].ok);
  EXPECT_FALSE(res.records[2].ok);
  EXPECT_NE(res.records[2].error.find("Infeasible"), std::string::npos);
  EXPECT_EQ(res.summary->failures, 1u);
  EXPECT_TRUE(std::isnan(res.summary->mean_cost_increase_pct));
  std::ostringstream csv;
  write_eval_csv(csv, res);
  EXPECT_NE(csv.str().find("\n2,,,,,,\n"), std::string::npos);
}

TEST(Evaluator, ViolationAveragesAreOverViolatedItems) {
  const NetworkCase net = data_case("case3.m");
  const DemandScenario d = net.nominal_demand();
  const PfSteadyState st = forward(net, init_classical(net), d, 0).state;
  const EvalRecord r = make_record(0, st, net, nullptr);
  const LossReport rep = loss_of(st, net, 0);
  EXPECT_NEAR(r.total_violation_mw, rep.total_violation_mw(), 1e-12);
  if (r.n_flow_viol > 0) {
    EXPECT_NEAR(r.avg_flow_viol_mw * r.n_flow_viol, rep.flow_violations.sum(), 1e-9);
  }
  EXPECT_NEAR(r.cost_usd, rep.cost * net.base_mva, 1e-9);
}

TEST(Evaluator, ParallelMatchesSerial) {
  const NetworkCase net = data_case("case39.m");
  const auto set = sample_scenarios(net, 6, 4);
  const EvalResult a = evaluate(net, init_classical(net), set, {}, 1);
  const EvalResult b = evaluate(net, init_classical(net), set, {}, 4);
  std::ostringstream ca, cb;
  write_eval_csv(ca, a);
  write_eval_csv(cb, b);
  EXPECT_EQ(ca.str(), cb.str());
}

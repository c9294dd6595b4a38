#include <gtest/gtest.h>

#include <complex>
#include <regex>

#include "support.hpp"

using namespace optlin;
using testing_support::data_case;
using testing_support::three_bus_text;
using testing_support::two_bus_text;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::Io;
}

}  // namespace

TEST(GridModel, Case39Dimensions) {
  const NetworkCase net = data_case("case39.m");
  EXPECT_EQ(net.num_buses(), 39u);
  EXPECT_EQ(net.num_branches(), 46u);
  EXPECT_EQ(net.num_gens(), 10u);
  EXPECT_DOUBLE_EQ(net.base_mva, 100.0);
  // generator buses come first
  const std::vector<int> gen_ids{30, 31, 32, 33, 34, 35, 36, 37, 38, 39};
  EXPECT_EQ(net.gen_bus_ids(), gen_ids);
  for (std::size_t i = 0; i < net.num_gens(); ++i) EXPECT_EQ(net.gens[i].bus, i);
}

TEST(GridModel, TwoBusDimensions) {
  const NetworkCase net = parse_case(two_bus_text(0, 0.1, 150));
  EXPECT_EQ(net.num_buses(), 2u);
  EXPECT_EQ(net.num_branches(), 1u);
  EXPECT_EQ(net.num_gens(), 1u);
  EXPECT_DOUBLE_EQ(net.gens[0].c2, 1.0);
  EXPECT_DOUBLE_EQ(net.gens[0].pmax, 2.0);
  EXPECT_DOUBLE_EQ(net.branches[0].p_f_max, 1.5);
}

TEST(GridModel, MissingBranchBlock) {
  std::string text = two_bus_text(0, 0.1, 150);
  text = std::regex_replace(text, std::regex("mpc\\.branch = \\[[^\\]]*\\];"), "");
  EXPECT_EQ(kind_of([&] { parse_case(text); }), ErrorKind::MissingBlock);
}

TEST(GridModel, CommentsAndSemicolons) {
  const std::string text =
      "function mpc = t\n% header\nmpc.baseMVA = 100;\n"
      "mpc.bus = [ 1 3 0 0 0 0 1 1 0 230 1 1.1 0.9; % first\n"
      "  2 1 50 10 0 0 1 1 0 230 1 1.1 0.9 ];\n"
      "mpc.gen = [ 1 0 0 300 -300 1 100 1 200 0 ];\n"
      "mpc.branch = [\n 1 2 0 0.1 0 0 0 0 0 0 1 -360 360\n];\n"
      "mpc.gencost = [ 2 0 0 3 0.01 0 0 ];\n";
  const NetworkCase net = parse_case(text);
  EXPECT_EQ(net.num_buses(), 2u);
  EXPECT_DOUBLE_EQ(net.buses[1].pd, 0.5);
  EXPECT_TRUE(std::isinf(net.branches[0].p_f_max));
}

TEST(GridModel, MalformedInputs) {
  EXPECT_EQ(kind_of([] { parse_case(std::regex_replace(two_bus_text(0, 0.1, 150), std::regex("1 2 0 0\\.1[0-9]*"), "1 2 0 0")); }),
            ErrorKind::ZeroReactance);
  EXPECT_EQ(kind_of([] {
              parse_case(std::regex_replace(two_bus_text(0, 0.1, 150), std::regex("150 0 0 0 0 1"), "150 0 0 -1 0 1"));
            }),
            ErrorKind::NonPositiveTap);
  EXPECT_EQ(kind_of([] { parse_case(std::regex_replace(two_bus_text(0, 0.1, 150), std::regex("\n1 2 0 "), "\n1 7 0 ")); }),
            ErrorKind::MalformedRow);
  EXPECT_EQ(kind_of([] { parse_case(std::regex_replace(two_bus_text(0, 0.1, 150), std::regex("\n2 0 0 3"), "\n1 0 0 3")); }),
            ErrorKind::UnsupportedCost);
  EXPECT_EQ(kind_of([] { parse_case(std::regex_replace(two_bus_text(0, 0.1, 150), std::regex("0 0 1 1 0 230 1 1.1 0.9;\n2"), "0 0 1 1 0 230 1 1.1 0.9;\n2 1 x")); }),
            ErrorKind::MalformedRow);
  // branch out of service leaves bus 2 disconnected
  EXPECT_EQ(kind_of([] {
              parse_case(std::regex_replace(two_bus_text(0, 0.1, 150), std::regex("0 0 1 -360"), "0 0 0 -360"));
            }),
            ErrorKind::InvalidCase);
}

TEST(GridModel, IncidenceTwoAndThreeBus) {
  const MatrixXd a2 = incidence(parse_case(two_bus_text(0, 0.1, 150)));
  ASSERT_EQ(a2.rows(), 1);
  EXPECT_EQ(a2(0, 0), 1);
  EXPECT_EQ(a2(0, 1), -1);

  // lines (1,2), (2,3), (1,3); buses 1 and 2 carry generators so numbering is unchanged
  const MatrixXd a3 = incidence(parse_case(three_bus_text()));
  MatrixXd expect(3, 3);
  expect << 1, -1, 0, 0, 1, -1, 1, 0, -1;
  EXPECT_EQ(a3, expect);
}

TEST(GridModel, IncidenceRowsSumToZero) {
  const MatrixXd a = incidence(data_case("case39.m"));
  EXPECT_EQ(a.rows(), 46);
  EXPECT_LT(a.rowwise().sum().cwiseAbs().maxCoeff(), 1e-15);
  for (Eigen::Index e = 0; e < a.rows(); ++e) EXPECT_EQ(a.row(e).cwiseAbs().sum(), 2.0);
}

TEST(GridModel, AdmittanceLossless) {
  const AdmittanceMatrix y = admittance(parse_case(two_bus_text(0, 0.1, 150)));
  EXPECT_NEAR(y.B(0, 0), -10, 1e-12);
  EXPECT_NEAR(y.B(0, 1), 10, 1e-12);
  EXPECT_NEAR(y.B(1, 0), 10, 1e-12);
  EXPECT_NEAR(y.B(1, 1), -10, 1e-12);
  EXPECT_EQ(y.G.cwiseAbs().maxCoeff(), 0.0);
}

TEST(GridModel, AdmittanceLossy) {
  const AdmittanceMatrix y = admittance(parse_case(two_bus_text(0.01, 0.1, 150)));
  // 1/(0.01 + 0.1j) = (0.01 - 0.1j)/0.0101
  EXPECT_NEAR(y.G(0, 0), 0.01 / 0.0101, 1e-12);
  EXPECT_NEAR(y.G(0, 0), 0.9901, 1e-4);
  EXPECT_NEAR(y.G(0, 1), -0.01 / 0.0101, 1e-12);
  EXPECT_NEAR(y.B(0, 0), -0.1 / 0.0101, 1e-12);
}

TEST(GridModel, AdmittanceMatchesIncidenceProductWithoutTaps) {
  MatpowerData data = parse_matpower_text(testing_support::read_file(testing_support::data_path("case39.m")));
  for (auto& row : data.branch) row.values[4] = row.values[8] = row.values[9] = 0.0;
  for (auto& row : data.bus) row.values[4] = row.values[5] = 0.0;
  const NetworkCase net = build_case(data);
  const AdmittanceMatrix y = admittance(net);
  const MatrixXd a = incidence(net);
  Eigen::VectorXcd ys(a.rows());
  for (Eigen::Index e = 0; e < a.rows(); ++e) {
    ys[e] = 1.0 / std::complex<double>(net.branches[std::size_t(e)].r, net.branches[std::size_t(e)].x);
  }
  const Eigen::MatrixXcd oracle = a.transpose().cast<std::complex<double>>() * ys.asDiagonal() * a.cast<std::complex<double>>();
  EXPECT_LT((oracle.real() - y.G).cwiseAbs().maxCoeff(), 1e-12 * oracle.cwiseAbs().maxCoeff());
  EXPECT_LT((oracle.imag() - y.B).cwiseAbs().maxCoeff(), 1e-12 * oracle.cwiseAbs().maxCoeff());
}

TEST(GridModel, TapAndShiftBranchModel) {
  BranchRecord br;
  br.r = 0.01, br.x = 0.1, br.b_sh = 0.04, br.tap = 1.05, br.shift = 0.1;
  const BranchAdmittance ya = branch_admittance(br);
  const std::complex<double> ys = 1.0 / std::complex<double>(0.01, 0.1);
  const std::complex<double> t = std::polar(1.05, 0.1);
  EXPECT_NEAR(std::abs(ya.yff - (ys + std::complex<double>(0, 0.02)) / (1.05 * 1.05)), 0, 1e-12);
  EXPECT_NEAR(std::abs(ya.ytt - (ys + std::complex<double>(0, 0.02))), 0, 1e-12);
  EXPECT_NEAR(std::abs(ya.yft + ys / std::conj(t)), 0, 1e-12);
  EXPECT_NEAR(std::abs(ya.ytf + ys / t), 0, 1e-12);
}

TEST(GridModel, MultiUnitBusIsMerged) {
  std::string text = two_bus_text(0, 0.1, 150);
  text = std::regex_replace(text, std::regex("mpc.gen = \\[\n"), "mpc.gen = [\n1 0 0 100 -100 1 100 1 100 0;\n");
  text = std::regex_replace(text, std::regex("mpc.gencost = \\[\n"), "mpc.gencost = [\n2 0 0 3 0.03 5 0;\n");
  const NetworkCase net = parse_case(text);
  ASSERT_EQ(net.num_gens(), 1u);
  EXPECT_EQ(net.gens[0].units, 2);
  EXPECT_DOUBLE_EQ(net.gens[0].pmax, 3.0);
  EXPECT_NEAR(net.gens[0].c2, 1.0 / (1.0 / 3.0 + 1.0 / 1.0), 1e-15);
}

TEST(GridModel, MatpowerRoundTrip) {
  const NetworkCase net = data_case("case39.m");
  const NetworkCase back = parse_case(to_matpower_text(to_matpower(net)));
  EXPECT_EQ(back.fingerprint(), net.fingerprint());
  const MatpowerData src = parse_matpower_text(testing_support::read_file(testing_support::data_path("case39.m")));
  const MatpowerData out = to_matpower(net);
  ASSERT_EQ(src.bus.size(), out.bus.size());
  for (std::size_t r = 0; r < src.bus.size(); ++r) {
    for (std::size_t c : {0, 2, 3, 4, 5}) {
      EXPECT_NEAR(out.bus[r].values[c], src.bus[r].values[c], 1e-9 * std::max(1.0, std::abs(src.bus[r].values[c])));
    }
  }
  for (std::size_t r = 0; r < src.gen.size(); ++r) {
    for (std::size_t c : {0, 8}) EXPECT_NEAR(out.gen[r].values[c], src.gen[r].values[c], 1e-9 * src.gen[r].values[c]);
  }
}

TEST(GridModel, JsonRoundTrip) {
  const NetworkCase net = data_case("case39.m");
  const NetworkCase back = parse_case_json(nlohmann::json::parse(to_json(to_matpower(net)).dump()));
  EXPECT_EQ(back.fingerprint(), net.fingerprint());
  EXPECT_EQ(data_case("case3.m").fingerprint(), parse_case(testing_support::read_file(testing_support::data_path("case3.m"))).fingerprint());
}

TEST(GridModel, ScenarioCountsAndBounds) {
  const NetworkCase net = data_case("case39.m");
  EXPECT_EQ(sample_scenarios(net, 64, 1).size(), 64u);
  const DemandScenario nominal = net.nominal_demand();

  const auto one = sample_scenarios(net, 1, 5, {1.0, 1.0});
  EXPECT_EQ(one[0].p_d, nominal.p_d);
  EXPECT_EQ(one[0].q_d, nominal.q_d);

  const auto set = sample_scenarios(net, 1000, 7);
  ASSERT_EQ(set.size(), 1000u);
  for (const auto& d : set) {
    for (Eigen::Index k = 0; k < d.p_d.size(); ++k) {
      const double lo = std::min(0.9 * nominal.p_d[k], 1.1 * nominal.p_d[k]);
      const double hi = std::max(0.9 * nominal.p_d[k], 1.1 * nominal.p_d[k]);
      EXPECT_GE(d.p_d[k], lo);
      EXPECT_LE(d.p_d[k], hi);
      // same factor on active and reactive demand
      if (nominal.p_d[k] != 0 && nominal.q_d[k] != 0) {
        EXPECT_NEAR(d.p_d[k] / nominal.p_d[k], d.q_d[k] / nominal.q_d[k], 1e-14);
      }
    }
  }
}

TEST(GridModel, ScenariosAreSeedDeterministic) {
  const NetworkCase net = data_case("case39.m");
  const auto a = sample_scenarios(net, 10, 42), b = sample_scenarios(net, 10, 42), c = sample_scenarios(net, 10, 43);
  for (std::size_t s = 0; s < 10; ++s) EXPECT_EQ(a[s].p_d, b[s].p_d);
  EXPECT_NE(a[0].p_d, c[0].p_d);
}

TEST(GridModel, FingerprintSensitiveToData) {
  const NetworkCase a = parse_case(two_bus_text(0, 0.1, 150));
  const NetworkCase b = parse_case(two_bus_text(0, 0.1, 151));
  EXPECT_NE(a.fingerprint(), b.fingerprint());
  EXPECT_EQ(a.fingerprint().size(), 16u);
}

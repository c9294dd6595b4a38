#ifndef OPTLIN_TESTS_SUPPORT_HPP
#define OPTLIN_TESTS_SUPPORT_HPP

#include <sstream>
#include <string>

#include "optlin/optlin.hpp"

namespace testing_support {

using optlin::read_file;

inline std::string data_path(const std::string& name) { return std::string(OPTLIN_DATA_DIR) + "/" + name; }

inline optlin::NetworkCase data_case(const std::string& name) { return optlin::load_case(data_path(name)); }

/// Generator at bus 1, load at bus 2, one line 1-2. Powers in MW, cost in $/MW^2h.
inline std::string two_bus_text(double r, double x, double rate_mw, double pmax_mw = 200, double pd_mw = 100,
                                double c2 = 0.01, double b_sh = 0, double qd = 0) {
  std::ostringstream s;
  s.precision(17);
  s << "mpc.baseMVA = 100;\n"
    << "mpc.bus = [\n"
    << "1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;\n"
    << "2 1 " << pd_mw << " " << qd << " 0 0 1 1 0 230 1 1.1 0.9;\n];\n"
    << "mpc.gen = [\n1 0 0 300 -300 1 100 1 " << pmax_mw << " 0;\n];\n"
    << "mpc.branch = [\n1 2 " << r << " " << x << " " << b_sh << " " << rate_mw << " 0 0 0 0 1 -360 360;\n];\n"
    << "mpc.gencost = [\n2 0 0 3 " << c2 << " 0 0;\n];\n";
  return s.str();
}

/// Two identical generators at buses 1 and 2, load at bus 3, identical lines.
inline std::string three_bus_text(double r = 0.0, double x = 0.1, double pd_mw = 100, double rate_mw = 0,
                                  double c2a = 0.01, double c2b = 0.01) {
  std::ostringstream s;
  s.precision(17);
  s << "mpc.baseMVA = 100;\n"
    << "mpc.bus = [\n"
    << "1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;\n"
    << "2 2 0 0 0 0 1 1 0 230 1 1.1 0.9;\n"
    << "3 1 " << pd_mw << " 0 0 0 1 1 0 230 1 1.1 0.9;\n];\n"
    << "mpc.gen = [\n1 0 0 300 -300 1 100 1 200 0;\n2 0 0 300 -300 1 100 1 200 0;\n];\n"
    << "mpc.branch = [\n"
    << "1 2 " << r << " " << x << " 0 " << rate_mw << " 0 0 0 0 1 -360 360;\n"
    << "2 3 " << r << " " << x << " 0 " << rate_mw << " 0 0 0 0 1 -360 360;\n"
    << "1 3 " << r << " " << x << " 0 " << rate_mw << " 0 0 0 0 1 -360 360;\n];\n"
    << "mpc.gencost = [\n2 0 0 3 " << c2a << " 0 0;\n2 0 0 3 " << c2b << " 0 0;\n];\n";
  return s.str();
}

}  // namespace testing_support

#endif  // OPTLIN_TESTS_SUPPORT_HPP

// One line per criterion 1..8; exit status 1 when any criterion fails.
#include <cstdlib>
#include <iostream>

#include "ulab/acceptance.hpp"
#include "ulab/harness.hpp"

int main(int argc, char** argv) {
  std::string out = argc > 1 ? argv[1] : "acceptance-out";
  bool all = true;
  for (int k = 1; k <= 8; ++k) {
    auto r = ulab::run_criterion(k, out);
    std::cout << ulab::format_line(r) << std::endl;
    all = all && r.pass;
  }
  auto rep = ulab::emit_report(out);
  std::cout << "report: " << out << "/report.json  matrix " << rep.doc["criteria"].dump()
            << (rep.exit_code == 0 ? "  all pass" : "  failures") << std::endl;
  return all && rep.exit_code == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}

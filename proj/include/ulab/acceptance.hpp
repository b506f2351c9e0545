#pragma once

#include <string>
#include <vector>

namespace ulab {

struct CriterionPart {
  std::string name;
  int status = 0;  // RunStatus of the part
  bool pass = false;
};

struct CriterionResult {
  int index = 0;
  bool pass = false;
  double seconds = 0;
  double budget = 0;  // wall-clock limit in seconds, part of pass
  std::vector<CriterionPart> parts;
};

// Runs every part of criterion k (1..8) into out_root/criterion-k/<part>/, each
// tagged with the criterion so that emit_report(out_root) builds the matrix.
CriterionResult run_criterion(int k, const std::string& out_root);

// "criterion k: PASS|FAIL  (x.xx s of y s)  part=ok ..."
std::string format_line(const CriterionResult& r);

}  // namespace ulab

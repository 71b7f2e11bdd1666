#pragma once

#include "pathflow/lie_group.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pathflow {

struct VerifyConfig {
  GroupTag tag = GroupTag::torus(2);
  int grid = 16;
  int atoms = 4;
  double p = 2.0;
  std::uint64_t seed = 1;
  int instances = 5;
};

// One invariant: passes when measured <= threshold. slack = threshold - measured.
struct CheckResult {
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;
  std::vector<std::string> notes;

  bool passed() const;
};

std::vector<std::string> suite_names();
// "all" runs every suite. Throws ValidationError on an unknown name.
std::vector<SuiteReport> run_suites(const std::string& name, const VerifyConfig& config);
SuiteReport run_suite(const std::string& name, const VerifyConfig& config);

}  // namespace pathflow

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace filterlab {

struct CriterionResult {
  std::string id;  // "1" .. "9", "8a" ..
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
  bool informational = false;  // reported, never counted
};

enum class Scale { small, full };

struct AcceptanceOptions {
  std::uint64_t seed = 12345;
  Scale scale = Scale::full;
};

Scale scale_from_name(const std::string& name);

// Suites: gaussian (1, 2), grid (3, 4, 5, 9), infoflow (6, 7),
// feedback (8a, 8b, 8c), all.
std::vector<std::string> suite_names();
std::vector<CriterionResult> run_suite(const std::string& suite, const AcceptanceOptions& options);

// Individual criteria.
std::vector<CriterionResult> check_free_surprise_lqg();
std::vector<CriterionResult> check_kalman_bucy_identity();
std::vector<CriterionResult> check_entropy_production_grid();
std::vector<CriterionResult> check_de_bruijn();
std::vector<CriterionResult> check_filter_equivalence(const AcceptanceOptions& options);
std::vector<CriterionResult> check_infoflow(const AcceptanceOptions& options);
std::vector<CriterionResult> check_feedback(const AcceptanceOptions& options);
std::vector<CriterionResult> check_properties(const AcceptanceOptions& options);

// "PASS  6  nonlinear MWZ ...  measured=... tol=... | detail"
std::string format_result(const CriterionResult& r);

}  // namespace filterlab

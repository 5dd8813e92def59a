#pragma once

#include "filterlab/config.hpp"
#include "filterlab/info_metrics.hpp"

#include <string>
#include <vector>

namespace filterlab {

inline constexpr const char* kVersionTag = "filterlab 0.1.0";

inline constexpr const char* kLedgerHeader =
    "t,H,dH_dt,F,dF_dt,trJ_rho,trJ_pi,trJ_pi_se,S_rate,S_rate_se,D_rate_fisher,D_rate_fisher_se,"
    "D_rate_gamma,D_rate_gamma_se,I_mc,I_mc_se,mwz_residual,mwz_residual_se";

// %.17g
std::string format_number(double v);

struct InvariantResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;   // worst case over the samples
  double tolerance = 0.0;
  double se = 0.0;         // SE at the worst sample
  std::string detail;
};

// Ledger CSV (header + one row per sample). Throws NumericalError on any
// non-finite value.
std::string ledger_csv(const InfoLedger& ledger);

// The sign, agreement and MWZ invariants of a ledger, all at 3 SE.
std::vector<InvariantResult> ledger_invariants(const InfoLedger& ledger);

struct RunOutput {
  std::string ledger_csv;
  std::string report_json;
  std::string snapshots_csv;  // empty unless requested
  bool all_passed = true;
  std::size_t excluded = 0;
};

// Runs a validated scenario and renders every output in memory; nothing
// is written, so a failing run leaves no files behind.
RunOutput run_scenario(const ScenarioConfig& config);

// Writes ledger.csv, report.json and (if present) snapshots.csv under
// config.output_dir.
void write_outputs(const ScenarioConfig& config, const RunOutput& output);

}  // namespace filterlab

#pragma once

// simulate -> analyze -> compare against ground truth.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "eui64leak/analysis.hpp"
#include "eui64leak/simgen.hpp"

namespace eui64leak {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Everything the analyzer produced for a simulation, plus the inputs it was
// given, so callers can write or re-check them.
struct SimulatedAnalysis {
  OuiDatabase db;
  Taxonomy taxonomy;
  std::shared_ptr<const ProviderMap> providers;
  AnalysisContext context;  // points into `providers`
  IngestStats stats;
  std::uint64_t generated_flows = 0;
  AnalysisReport report;
};

struct VerifyOptions {
  unsigned threads = 1;
  AnonymizeSide anonymize_side = AnonymizeSide::Src;
  std::optional<AnonymizationKey> key;  // default: derived from the seed
  AnalysisOptions analysis;
};

// Streams the simulator's flows through the CSV text path of the ingest
// pipeline. `on_flow` (optional) sees every generated flow first.
SimulatedAnalysis analyze_simulation(const Simulator& sim, const VerifyOptions& options,
                                     const std::function<void(const SimFlow&)>& on_flow = {});

// Per-seed key used when none is supplied.
AnonymizationKey default_verify_key(std::uint64_t seed);

struct VerifyOutcome {
  std::vector<CheckResult> checks;
  SimulatedAnalysis analysis;

  bool passed() const;
};

// Checks: flow conservation, periphery detection, rotation-linkage recall
// and precision, privacy-only isolation, end-user /56 and linked Venn
// counts, per-provider collateral, MQTT proxy, Hamming fit.
VerifyOutcome run_verify(const Simulator& sim, const VerifyOptions& options);

}  // namespace eui64leak

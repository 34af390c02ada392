// Acceptance run: one PASS/FAIL line per criterion. Each criterion runs in a
// forked child so peak-memory figures are per criterion.

#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <fmt/format.h>

#include "eui64leak/digest.hpp"
#include "eui64leak/random.hpp"
#include "eui64leak/report.hpp"
#include "eui64leak/verify.hpp"
#include "fixture.hpp"

using namespace eui64leak;

namespace {

// Tolerances and sizes.
constexpr std::size_t kRoundTripMacs = 1'000'000;
constexpr std::size_t kFalsePositiveIids = 10'000'000;
constexpr double kFalsePositiveCi = 0.99;
constexpr double kFastLimitSeconds = 60.0;

constexpr std::uint32_t kTrackerHouseholds = 10'000;

constexpr std::uint32_t kScenarioHouseholds = 100'000;
constexpr double kPrevalenceTarget = 0.19;
constexpr double kPrevalenceTolerance = 0.004;
constexpr double kCollateralTarget = 0.17;
constexpr double kCollateralTolerance = 0.005;

constexpr std::size_t kHammingSample = 1'000'000;
constexpr double kHammingMeanTolerance = 0.05;
constexpr double kHammingMinP = 0.01;
constexpr std::size_t kInjectedZeros = 10'000;
constexpr double kNegativeControlMaxP = 1e-6;

constexpr std::size_t kOracleMaxFlows = 10'000;

constexpr std::uint64_t kThroughputFlows = 10'000'000;
constexpr double kThroughputLimitSeconds = 300.0;
constexpr double kMemoryGrowthLimit = 1.25;  // peak(2x flows) / peak(1x flows), same population

const AnonymizationKey kKey = AnonymizationKey::from_hex("000102030405060708090a0b0c0d0e0f");

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::uint64_t peak_rss_bytes() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VmHWM:", 0) == 0) return std::stoull(line.substr(6)) * 1024;
  }
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  return static_cast<std::uint64_t>(ru.ru_maxrss) * 1024;
}

void reset_peak_rss() { std::ofstream("/proc/self/clear_refs") << "5"; }

unsigned worker_threads() { return std::max(4u, std::thread::hardware_concurrency()); }

SimConfig demo() { return SimConfig::load_file(EUI64LEAK_SOURCE_DIR "/data/demo/demo.conf"); }

// One rotation epoch, one contact slot, and every device contacts HG1, so
// every device of every household is observed.
SimConfig single_slot(std::uint64_t seed) {
  auto c = demo();
  c.seed = seed;
  c.households = kScenarioHouseholds;
  c.duration = c.rotation_period = c.contact_interval = 86400;
  for (auto& p : c.providers) {
    if (p.name == "HG1") p.p_eui64 = p.p_privacy = p.p_cpe = 1.0;
  }
  return c;
}

std::string summary(const AnalysisReport& r, std::string_view key) {
  for (const auto& [k, v] : r.summary) {
    if (k == key) return v;
  }
  return {};
}

// 1. MAC <-> EUI-64 round trip and the false-positive rate of is_eui64.
Outcome address_algebra() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_seed({1, 1}));
  std::size_t round_trip_failures = 0, undetected = 0;
  for (std::size_t i = 0; i < kRoundTripMacs; ++i) {
    const std::uint64_t bits = rng.next();
    Mac48 mac;
    for (int k = 0; k < 6; ++k) mac.octets[k] = static_cast<std::uint8_t>(bits >> (8 * k));
    const auto iid = eui64_from_mac(mac);
    undetected += is_eui64(iid) ? 0 : 1;
    round_trip_failures += mac_from_eui64(iid) == mac ? 0 : 1;
  }
  std::uint64_t hits = 0;
  for (std::size_t i = 0; i < kFalsePositiveIids; ++i) hits += is_eui64(Iid64{rng.next()}) ? 1 : 0;

  const boost::math::binomial_distribution<double> dist(static_cast<double>(kFalsePositiveIids), std::ldexp(1.0, -16));
  const double alpha = (1.0 - kFalsePositiveCi) / 2;
  const double lo = boost::math::quantile(dist, alpha);
  const double hi = boost::math::quantile(boost::math::complement(dist, alpha));
  const double secs = seconds_since(t0);
  const bool pass = round_trip_failures == 0 && undetected == 0 && hits >= lo && hits <= hi && secs < kFastLimitSeconds;
  return {pass, fmt::format("{} MAC round trips, {} failures, {} undetected; false positives {} of {} in 99% CI "
                            "[{:.0f}, {:.0f}]; {:.1f}s",
                            kRoundTripMacs, round_trip_failures, undetected, hits, kFalsePositiveIids, lo, hi, secs)};
}

// 2. Rotation linkage against simulator ground truth.
Outcome tracker_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  auto c = demo();
  c.households = kTrackerHouseholds;
  c.exclude_fffe_collisions = true;
  Simulator sim(c);
  VerifyOptions opts;
  opts.threads = worker_threads();
  opts.key = kKey;
  auto outcome = run_verify(sim, opts);
  const double secs = seconds_since(t0);
  bool pass = c.epochs() == 2 && secs < kFastLimitSeconds;
  std::string detail;
  for (const auto& check : outcome.checks) {
    if (check.name != "linkage_recall" && check.name != "linkage_precision" && check.name != "privacy_only_isolation") {
      continue;
    }
    pass = pass && check.passed;
    detail += fmt::format("{} [{}]; ", check.name, check.detail);
  }
  return {pass, fmt::format("{} households, {} epochs: {}{:.1f}s", c.households, c.epochs(), detail, secs)};
}

// 3. End-user at-risk fraction recovers p_eui64_household.
Outcome prevalence() {
  auto c = single_slot(3);
  c.p_eui64_household = kPrevalenceTarget;
  Simulator sim(c);
  VerifyOptions opts;
  opts.threads = worker_threads();
  opts.key = kKey;
  auto result = analyze_simulation(sim, opts);
  std::uint64_t truth = 0;
  for (const auto& h : sim.households()) truth += h.has_eui64() ? 1 : 0;
  const double measured = std::stod(summary(result.report, "at_risk_fraction"));
  const double exact = static_cast<double>(truth) / c.households;
  const bool pass = std::abs(measured - kPrevalenceTarget) <= kPrevalenceTolerance &&
                    std::abs(measured - exact) < 1e-6 && result.report.periphery.size() == c.periphery_pool_size;
  return {pass, fmt::format("{} households: at_risk_fraction {:.6f} (target {} +/- {}); ground truth {}/{}; "
                            "{} periphery prefixes excluded",
                            c.households, measured, kPrevalenceTarget, kPrevalenceTolerance, truth, c.households,
                            result.report.periphery.size())};
}

// 4. Collateral leakage at HG1 recovers the dual-type share; the analyzer's
// integer counts equal both the oracle's and the ground truth's.
Outcome collateral() {
  auto c = single_slot(4);
  c.p_eui64_household = 0.19;
  c.p_dual_given_eui64 = kCollateralTarget / 0.19;
  Simulator sim(c);
  fixture::Case fx;
  fx.set_side(AnonymizeSide::Src, kKey);
  fixture::from_simulation(fx, sim, SIZE_MAX);
  auto report = fx.analyze(worker_threads());
  auto tables = oracle::recompute(fx.inputs);

  std::uint64_t truth = 0;
  for (const auto& h : sim.households()) truth += h.has_eui64() && h.has_privacy() ? 1 : 0;
  const CollateralRow* hg1 = nullptr;
  for (const auto& r : report.collateral.rows) {
    if (r.provider_id == "HG1") hg1 = &r;
  }
  if (!hg1) return {false, "no HG1 row"};
  const bool oracle_equal = tables.collateral == report.collateral;
  const bool pass = std::abs(hg1->fraction - kCollateralTarget) <= kCollateralTolerance && oracle_equal &&
                    hg1->prefixes == truth;
  return {pass, fmt::format("{} households, {} flows: HG1 {}/{} = {:.6f} (target {} +/- {}); oracle table {}; "
                            "ground truth {}",
                            c.households, fx.flows.size(), hg1->prefixes, report.collateral.end_user_prefixes,
                            hg1->fraction, kCollateralTarget, kCollateralTolerance,
                            oracle_equal ? "equal" : "DIFFERENT", truth)};
}

// 5. Hamming weights of simulated privacy IIDs against Binomial(63, 1/2).
Outcome hamming() {
  Rng rng(derive_seed({5, 2}));
  std::vector<std::uint64_t> iids(kHammingSample);
  for (auto& v : iids) v = random_privacy_iid(rng, true).bits;
  auto fit = hamming_fit(iids, 10000);
  iids.insert(iids.end(), kInjectedZeros, 0);
  auto poisoned = hamming_fit(iids, 10000);
  const bool pass = fit.sufficient && std::abs(fit.mean - 31.5) <= kHammingMeanTolerance && fit.p_value > kHammingMinP &&
                    poisoned.p_value < kNegativeControlMaxP;
  return {pass, fmt::format("n={} mean={:.4f} chi2={:.2f} dof={} p={:.4f}; with {} zero IIDs p={:.3g}", fit.sample_size,
                            fit.mean, fit.chi_square, fit.degrees_of_freedom, fit.p_value, kInjectedZeros,
                            poisoned.p_value)};
}

// 6. Every table equals the brute-force recomputation.
Outcome oracle_equivalence() {
  std::size_t fixtures = 0, failing = 0, max_flows = 0;
  std::string first_failure;
  auto run = [&](fixture::Case& fx, const std::string& label) {
    ++fixtures;
    max_flows = std::max(max_flows, fx.flows.size());
    auto diff = oracle::differences(oracle::recompute(fx.inputs), fx.analyze(2));
    if (fx.flows.size() > kOracleMaxFlows) diff.push_back("fixture too large");
    if (!diff.empty()) {
      ++failing;
      if (first_failure.empty()) first_failure = label + ": " + diff.front();
    }
  };
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    for (auto side : {AnonymizeSide::Src, AnonymizeSide::None}) {
      auto c = demo();
      c.seed = seed;
      c.households = 120;
      c.contact_interval = 4 * 3600;
      Simulator sim(c);
      fixture::Case fx;
      fx.options.periphery.min_eui64_iids = 8;
      fx.options.bucket_seconds = 7200;
      fx.set_side(side, side == AnonymizeSide::None ? std::nullopt : std::optional(kKey));
      fixture::from_simulation(fx, sim, kOracleMaxFlows);
      run(fx, fmt::format("demo seed {} side {}", seed, to_string(side)));
    }
  }
  const AnonymizeSide sides[] = {AnonymizeSide::None, AnonymizeSide::Src, AnonymizeSide::Dst, AnonymizeSide::Both};
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    fixture::Case fx;
    auto side = sides[seed % 4];
    fx.set_side(side, side == AnonymizeSide::None ? std::nullopt : std::optional(kKey));
    fixture::random_case(fx, seed);
    run(fx, fmt::format("random seed {}", seed));
  }
  return {failing == 0,
          fmt::format("{} fixtures (largest {} flows), {} differing{}; tables: venn, oui_popularity, category_shares, "
                      "iot_composition, collateral, mqtt, ports, timeseries, tracking, periphery, hamming",
                      fixtures, max_flows, failing, first_failure.empty() ? "" : " (" + first_failure + ")")};
}

// 7. Byte-identical reports across runs and worker counts.
Outcome determinism() {
  auto c = demo();
  auto render = [&](unsigned threads) {
    Simulator sim(c);
    VerifyOptions opts;
    opts.threads = threads;
    opts.key = kKey;
    return render_report(analyze_simulation(sim, opts).report);
  };
  const auto a = render(1);
  const auto b = render(1);
  const auto n = render(worker_threads());
  std::ifstream pinned_in(EUI64LEAK_SOURCE_DIR "/data/demo/expected_digests.json");
  const auto pinned = nlohmann::json::parse(pinned_in)["analyze"];
  std::size_t pinned_match = 0;
  for (const auto& [name, content] : a) pinned_match += pinned.value(name, "") == digest_bytes(content) ? 1 : 0;
  const bool pass = a == b && a == n && pinned_match == a.size();
  return {pass, fmt::format("{} tables; run 1 vs run 2 {}; 1 vs {} threads {}; {}/{} match pinned demo digests",
                            a.size(), a == b ? "identical" : "DIFFERENT", worker_threads(),
                            a == n ? "identical" : "DIFFERENT", pinned_match, a.size())};
}

// 8. Throughput and memory growth with flow count at fixed population.
Outcome throughput() {
  auto c = demo();
  c.households = 40'000;
  c.flows_per_contact = 1.0;
  VerifyOptions opts;
  opts.threads = worker_threads();
  opts.key = kKey;

  reset_peak_rss();
  const std::uint64_t base = peak_rss_bytes();
  std::uint64_t small_flows = 0, small_peak = 0;
  {
    Simulator sim(c);
    auto r = analyze_simulation(sim, opts);
    small_flows = r.stats.records;
    small_peak = peak_rss_bytes() - base;
  }

  c.flows_per_contact = 2.0;
  Simulator sim(c);
  const auto t0 = std::chrono::steady_clock::now();
  auto r = analyze_simulation(sim, opts);
  const double secs = seconds_since(t0);
  const std::uint64_t big_peak = peak_rss_bytes() - base;
  const std::uint64_t flows = r.stats.records;
  const double growth = static_cast<double>(big_peak) / static_cast<double>(std::max<std::uint64_t>(small_peak, 1));
  const double flow_ratio = static_cast<double>(flows) / static_cast<double>(small_flows);
  const bool pass = flows >= kThroughputFlows && secs < kThroughputLimitSeconds && growth <= kMemoryGrowthLimit;
  return {pass, fmt::format("{} flows generated and analyzed in {:.1f}s on {} threads ({:.0f} flows/s); "
                            "peak memory {:.1f} MiB vs {:.1f} MiB for {:.2f}x fewer flows (growth {:.2f}, limit {}); "
                            "{} prefixes",
                            flows, secs, opts.threads, static_cast<double>(flows) / secs,
                            static_cast<double>(big_peak) / (1 << 20), static_cast<double>(small_peak) / (1 << 20),
                            flow_ratio, growth, kMemoryGrowthLimit, summary(r.report, "prefixes_total"))};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

// Runs `c` in a child process; the child reports over a pipe.
Outcome isolated(const Criterion& c) {
  int fds[2];
  if (pipe(fds) != 0) return {false, "pipe failed"};
  std::fflush(stdout);
  pid_t pid = fork();
  if (pid < 0) return {false, "fork failed"};
  if (pid == 0) {
    close(fds[0]);
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::string msg = (o.pass ? "1" : "0") + o.detail;
    ssize_t ignored = write(fds[1], msg.data(), msg.size());
    (void)ignored;
    close(fds[1]);
    _exit(0);
  }
  close(fds[1]);
  std::string msg;
  char buf[4096];
  ssize_t n;
  while ((n = read(fds[0], buf, sizeof buf)) > 0) msg.append(buf, static_cast<std::size_t>(n));
  close(fds[0]);
  int status = 0;
  waitpid(pid, &status, 0);
  if (msg.empty()) return {false, fmt::format("child ended without a result (status {})", status)};
  return {msg[0] == '1', msg.substr(1)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "address_algebra", address_algebra},
      {2, "tracker_oracle", tracker_oracle},
      {3, "scenario_prevalence", prevalence},
      {4, "scenario_collateral", collateral},
      {5, "hamming_fit", hamming},
      {6, "oracle_equivalence", oracle_equivalence},
      {7, "determinism", determinism},
      {8, "throughput", throughput},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    auto o = isolated(c);
    std::printf("%s criterion %d %s (%.1fs): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, seconds_since(t0),
                o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}

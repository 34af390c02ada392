#include "eui64leak/verify.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "eui64leak/pipeline.hpp"

namespace eui64leak {

namespace {

constexpr std::size_t kChunkFlows = 1 << 14;

std::string venn_str(const VennCounts& v) {
  return fmt::format("eui64_only={} both={} non_eui64_only={}", v.eui64_only, v.both, v.non_eui64_only);
}

// What the ground truth says about one observed end-user prefix.
struct TruthPrefix {
  std::uint32_t household = 0;
  bool eui = false;
  bool other = false;
  std::set<std::size_t> eui_providers;
  std::set<std::size_t> other_providers;
};

}  // namespace

AnonymizationKey default_verify_key(std::uint64_t seed) {
  std::array<std::uint8_t, 16> bytes{};
  const std::uint64_t a = derive_seed({seed, 0x6b6579});
  const std::uint64_t b = splitmix64(a);
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<std::uint8_t>(a >> (8 * i));
    bytes[8 + i] = static_cast<std::uint8_t>(b >> (8 * i));
  }
  return AnonymizationKey(bytes);
}

SimulatedAnalysis analyze_simulation(const Simulator& sim, const VerifyOptions& options,
                                     const std::function<void(const SimFlow&)>& on_flow) {
  SimulatedAnalysis out;
  {
    std::istringstream in(sim.oui_registry_csv());
    out.db = OuiDatabase::load(in);
  }
  {
    std::istringstream in(sim.taxonomy_csv());
    out.taxonomy = Taxonomy::load(in);
  }
  {
    std::istringstream in(sim.providers_csv());
    out.providers = std::make_shared<const ProviderMap>(ProviderMap::load(in));
  }
  out.context.providers = out.providers.get();
  {
    std::istringstream in(sim.signatures_csv());
    out.context.products = load_signatures(in, *out.providers);
  }
  out.context.anonymize_side = options.anonymize_side;
  if (options.anonymize_side != AnonymizeSide::None) {
    out.context.key = options.key ? *options.key : default_verify_key(sim.config().seed);
  }

  IngestPipeline pipeline(out.context, options.threads);
  std::string chunk;
  std::size_t in_chunk = 0;
  chunk.append(kFlowHeader).push_back('\n');
  sim.run([&](const SimFlow& f) {
    if (on_flow) on_flow(f);
    ++out.generated_flows;
    append_flow(chunk, f.flow);
    if (++in_chunk == kChunkFlows) {
      pipeline.ingest_text(std::move(chunk));
      chunk.clear();
      in_chunk = 0;
    }
  });
  if (!chunk.empty()) pipeline.ingest_text(std::move(chunk));
  auto acc = pipeline.finish();
  out.stats = pipeline.stats();
  out.report = build_report(acc, out.db, out.taxonomy, *out.providers, options.analysis, out.stats);
  return out;
}

bool VerifyOutcome::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

VerifyOutcome run_verify(const Simulator& sim, const VerifyOptions& options) {
  const auto& cfg = sim.config();
  const auto side = options.anonymize_side;
  const AnonymizationKey key = options.key ? *options.key : default_verify_key(cfg.seed);
  auto token_of = [&](const Address128& a) {
    return (side == AnonymizeSide::Src || side == AnonymizeSide::Both) ? anonymize(a, key).prefix_token
                                                                       : passthrough(a).prefix_token;
  };

  std::map<PrefixToken, TruthPrefix> end_user;
  std::map<PrefixToken, std::set<std::uint64_t>> periphery_iids;
  std::set<std::pair<PrefixToken, std::uint64_t>> mqtt_all, mqtt_eui;
  std::set<std::uint32_t> households_seen;

  // Destination -> provider by direct scan of the configured prefixes;
  // configs do not nest provider prefixes, so the first hit is the match.
  auto provider_of = [&](const Address128& dst) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < cfg.providers.size(); ++i) {
      if (contains(cfg.providers[i].prefix, dst)) return i;
    }
    return std::nullopt;
  };

  VerifyOutcome outcome;
  VerifyOptions run_options = options;
  run_options.key = key;
  outcome.analysis = analyze_simulation(sim, run_options, [&](const SimFlow& f) {
    const auto& hh = sim.households()[f.owner.household];
    const auto& dev = hh.devices[f.owner.device];
    const PrefixToken token = token_of(f.flow.src);
    const bool eui_kind = dev.kind != DeviceKind::Privacy;
    if (f.flow.protocol == kProtoTcp && f.flow.dst_port == kMqttTlsPort) {
      mqtt_all.emplace(token, f.flow.src.lo);
      if (eui_kind) mqtt_eui.emplace(token, f.flow.src.lo);
    }
    if (dev.kind == DeviceKind::Cpe) {
      periphery_iids[token].insert(f.flow.src.lo);
      return;
    }
    households_seen.insert(hh.id);
    auto& t = end_user[token];
    t.household = hh.id;
    const auto provider = provider_of(f.flow.dst);
    if (dev.kind == DeviceKind::Eui64) {
      t.eui = true;
      if (provider) t.eui_providers.insert(*provider);
    } else {
      t.other = true;
      if (provider) t.other_providers.insert(*provider);
    }
  });
  const auto& analysis = outcome.analysis;
  const auto& report = analysis.report;
  auto add = [&](std::string name, bool ok, std::string detail) {
    outcome.checks.push_back(CheckResult{std::move(name), ok, std::move(detail)});
  };

  // Flow conservation.
  add("flow_conservation",
      analysis.stats.records == analysis.generated_flows && analysis.stats.malformed == 0,
      fmt::format("generated={} ingested={} malformed={}", analysis.generated_flows, analysis.stats.records,
                  analysis.stats.malformed));

  // Periphery: pool prefixes carrying enough distinct CPE IIDs.
  std::vector<PrefixToken> periphery_truth;
  for (const auto& [token, iids] : periphery_iids) {
    if (iids.size() >= options.analysis.periphery.min_eui64_iids) periphery_truth.push_back(token);
  }
  add("periphery_detection", periphery_truth == report.periphery,
      fmt::format("expected={} detected={}", periphery_truth.size(), report.periphery.size()));

  // Linkage recall: each household's prefixes that carried EUI-64 traffic
  // share one component.
  std::map<std::uint32_t, std::vector<PrefixToken>> eui_tokens_by_household;
  for (const auto& [token, t] : end_user) {
    if (t.eui) eui_tokens_by_household[t.household].push_back(token);
  }
  std::uint64_t pairs_expected = 0, pairs_linked = 0;
  for (const auto& [h, tokens] : eui_tokens_by_household) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      for (std::size_t j = i + 1; j < tokens.size(); ++j) {
        ++pairs_expected;
        auto a = report.tracking.component_of(tokens[i]);
        auto b = report.tracking.component_of(tokens[j]);
        if (a && b && *a == *b) ++pairs_linked;
      }
    }
  }
  add("linkage_recall", pairs_linked == pairs_expected,
      fmt::format("linked {}/{} same-household prefix pairs (recall {:.6f})", pairs_linked, pairs_expected,
                  pairs_expected ? static_cast<double>(pairs_linked) / static_cast<double>(pairs_expected) : 1.0));

  // Linkage precision: no component spans households.
  std::uint64_t mixed = 0, linked_pairs_total = 0, linked_pairs_correct = 0;
  for (const auto& comp : report.tracking.components()) {
    std::vector<std::uint32_t> owners;
    for (auto token : comp.members) {
      auto it = end_user.find(token);
      if (it != end_user.end()) owners.push_back(it->second.household);
    }
    for (std::size_t i = 0; i < owners.size(); ++i) {
      for (std::size_t j = i + 1; j < owners.size(); ++j) {
        ++linked_pairs_total;
        if (owners[i] == owners[j]) ++linked_pairs_correct;
      }
    }
    if (std::adjacent_find(owners.begin(), owners.end(), std::not_equal_to<>()) != owners.end()) ++mixed;
  }
  add("linkage_precision", mixed == 0,
      fmt::format("{} components span households; precision {:.6f}", mixed,
                  linked_pairs_total ? static_cast<double>(linked_pairs_correct) / static_cast<double>(linked_pairs_total)
                                     : 1.0));

  // Privacy-only households never link across epochs.
  std::uint64_t leaked = 0;
  for (const auto& [token, t] : end_user) {
    if (sim.households()[t.household].has_eui64()) continue;
    auto comp = report.tracking.component_of(token);
    if (comp && report.tracking.components()[*comp].members.size() != 1) ++leaked;
  }
  add("privacy_only_isolation", leaked == 0, fmt::format("{} privacy-only prefixes in multi-prefix components", leaked));

  // End-user /56 Venn, unlinked and linked.
  VennCounts venn56, venn_linked;
  std::map<std::uint32_t, std::pair<bool, bool>> linked_by_household;
  auto tally = [](VennCounts& v, bool eui, bool other) {
    if (eui && other) ++v.both;
    else if (eui) ++v.eui64_only;
    else if (other) ++v.non_eui64_only;
  };
  for (const auto& [token, t] : end_user) {
    tally(venn56, t.eui, t.other);
    if (t.eui) {
      auto& [e, o] = linked_by_household[t.household];
      e = true;
      o = o || t.other;
    } else {
      tally(venn_linked, false, t.other);
    }
  }
  for (const auto& [h, eo] : linked_by_household) tally(venn_linked, eo.first, eo.second);
  add("venn_end_user_56", venn56 == report.venn[5].counts,
      fmt::format("expected {} got {}", venn_str(venn56), venn_str(report.venn[5].counts)));
  add("venn_end_user_56_linked", venn_linked == report.venn[6].counts,
      fmt::format("expected {} got {}", venn_str(venn_linked), venn_str(report.venn[6].counts)));
  {
    const auto comps = venn_linked.eui64_only + venn_linked.both + venn_linked.non_eui64_only;
    const auto risk = venn_linked.eui64_only + venn_linked.both;
    const std::uint64_t eui_prefixes = venn56.eui64_only + venn56.both;
    add("at_risk_households", risk == linked_by_household.size(),
        fmt::format("{} of {} observed households at risk; {} of {} end-user prefixes (fraction {:.6f}); {} linked "
                    "components",
                    linked_by_household.size(), households_seen.size(), eui_prefixes, end_user.size(),
                    end_user.empty() ? 0.0 : static_cast<double>(eui_prefixes) / static_cast<double>(end_user.size()),
                    comps));
  }

  // Collateral per provider, then the union row.
  {
    std::vector<std::uint64_t> per_provider(cfg.providers.size(), 0);
    std::uint64_t any = 0;
    for (const auto& [token, t] : end_user) {
      bool hit = false;
      for (auto p : t.eui_providers) {
        if (t.other_providers.count(p)) {
          ++per_provider[p];
          hit = true;
        }
      }
      any += hit ? 1 : 0;
    }
    std::map<std::string, std::uint64_t> expected;
    for (std::size_t i = 0; i < cfg.providers.size(); ++i) expected[cfg.providers[i].name] = per_provider[i];
    std::vector<std::string> diffs;
    for (const auto& row : report.collateral.rows) {
      const std::uint64_t want = row.provider_id == "*" ? any : expected[row.provider_id];
      if (want != row.prefixes) diffs.push_back(fmt::format("{}: expected {} got {}", row.provider_id, want, row.prefixes));
    }
    if (report.collateral.end_user_prefixes != end_user.size()) {
      diffs.push_back(fmt::format("end-user prefixes: expected {} got {}", end_user.size(),
                                  report.collateral.end_user_prefixes));
    }
    std::string detail = diffs.empty() ? fmt::format("union {} of {} end-user prefixes", any, end_user.size()) : "";
    for (const auto& d : diffs) detail += (detail.empty() ? "" : "; ") + d;
    add("collateral", diffs.empty(), detail);
  }

  // MQTT proxy.
  add("mqtt_proxy",
      report.mqtt.total_sources == mqtt_all.size() && report.mqtt.eui64_sources == mqtt_eui.size(),
      fmt::format("expected {}/{} got {}/{}", mqtt_eui.size(), mqtt_all.size(), report.mqtt.eui64_sources,
                  report.mqtt.total_sources));

  // Hamming fit of privacy IIDs.
  if (report.hamming.sufficient) {
    add("hamming_fit", report.hamming.p_value > 0.01,
        fmt::format("n={} mean={:.4f} chi2={:.3f} dof={} p={:.4g}", report.hamming.sample_size, report.hamming.mean,
                    report.hamming.chi_square, report.hamming.degrees_of_freedom, report.hamming.p_value));
  } else {
    add("hamming_fit", true, fmt::format("skipped: {} privacy IIDs below minimum {}", report.hamming.sample_size,
                                         options.analysis.hamming_min_sample));
  }
  return outcome;
}

}  // namespace eui64leak

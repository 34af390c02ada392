#pragma once

// Analyzer-side and oracle-side views of the same flow set.

#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include "eui64leak/pipeline.hpp"
#include "eui64leak/simgen.hpp"
#include "oracle.hpp"

namespace fixture {

using namespace eui64leak;

struct Case {
  OuiDatabase db;
  Taxonomy taxonomy;
  ProviderMap providers;
  AnalysisContext ctx;
  AnalysisOptions options;
  std::vector<FlowRecord> flows;
  oracle::Inputs inputs;

  Case() = default;
  Case(const Case&) = delete;
  Case& operator=(const Case&) = delete;

  void set_side(AnonymizeSide side, std::optional<AnonymizationKey> key) {
    ctx.anonymize_side = side;
    ctx.key = key;
    inputs.side = side;
    if (key) inputs.key = key->bytes();
  }

  // Fills the oracle inputs from the analyzer-side state. Call after flows,
  // providers and products are final.
  void seal(const std::vector<std::pair<Prefix, std::string>>& rules, const std::vector<oracle::Product>& products) {
    ctx.providers = &providers;
    inputs.flows = flows;
    inputs.db = &db;
    inputs.taxonomy = &taxonomy;
    inputs.provider_rules = rules;
    inputs.products = products;
    inputs.product_ouis = ctx.product_ouis;
    inputs.options = options;
  }

  AnalysisReport analyze(unsigned threads = 1) const {
    IngestPipeline pipe(ctx, threads);
    std::string chunk;
    std::size_t n = 0;
    for (const auto& f : flows) {
      append_flow(chunk, f);
      if (++n % 997 == 0) pipe.ingest_text(std::exchange(chunk, {}));
    }
    if (!chunk.empty()) pipe.ingest_text(std::move(chunk));
    auto acc = pipe.finish();
    return build_report(acc, db, taxonomy, providers, options, pipe.stats());
  }
};

// Loads everything the simulator describes and keeps the first `max_flows`
// flows.
inline void from_simulation(Case& c, const Simulator& sim, std::size_t max_flows) {
  std::istringstream reg(sim.oui_registry_csv()), tax(sim.taxonomy_csv()), prov(sim.providers_csv()),
      sig(sim.signatures_csv());
  c.db = OuiDatabase::load(reg);
  c.taxonomy = Taxonomy::load(tax);
  c.providers = ProviderMap::load(prov);
  c.ctx.products = load_signatures(sig, c.providers);
  sim.run([&](const SimFlow& f) {
    if (c.flows.size() < max_flows) c.flows.push_back(f.flow);
  });

  std::vector<std::pair<Prefix, std::string>> rules;
  for (const auto& p : sim.config().providers) rules.emplace_back(p.prefix, p.name);
  std::vector<oracle::Product> products;
  for (const auto& p : sim.config().products) {
    oracle::Product op{p.name, {}};
    for (const auto& [provider, port] : p.targets) op.elements.push_back(oracle::Element{provider, std::nullopt, port});
    products.push_back(std::move(op));
  }
  c.seal(rules, products);
}

inline std::uint64_t eui(std::uint32_t oui, std::uint32_t low) {
  Mac48 m{{static_cast<std::uint8_t>(oui >> 16), static_cast<std::uint8_t>(oui >> 8), static_cast<std::uint8_t>(oui),
           static_cast<std::uint8_t>(low >> 16), static_cast<std::uint8_t>(low >> 8), static_cast<std::uint8_t>(low)}};
  return eui64_from_mac(m).bits;
}

// Random flows over a small address space: overlapping IIDs across prefixes,
// a CPE-dense prefix, nested provider rules, prefix-based signatures.
inline void random_case(fixture::Case& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::istringstream reg("00aa01,Gateway Co,x\n00aa02,Telly Co,x\n00aa04,Desk Co,x\n00aa05,Disk Co,x\n");
  c.db = OuiDatabase::load(reg);
  std::istringstream tax(
      "00aa01,CPE\n00aa02,IoT,Entertainment\n00aa04,Computers|Mobile\n00aa05,IoT\n00aa06,IoT|Computers\n");
  c.taxonomy = Taxonomy::load(tax);

  const std::vector<std::pair<Prefix, std::string>> rules = {
      {parse_prefix("2a00::/16"), "WIDE"},
      {parse_prefix("2a00:1000::/32"), "HG1"},
      {parse_prefix("2a00:1000:5::/48"), "EDGE"},
      {parse_prefix("2a00:2000::/32"), "HG2"},
      {parse_prefix("2a00:2000::/32"), "HG2B"},  // re-added, later wins
  };
  for (const auto& [p, n] : rules) c.providers.add(p, n);

  std::istringstream sig("cam,HG1,443\ncam,2a00:2000::/32,8883\nhub,EDGE\nhub,WIDE,123\n");
  c.ctx.products = load_signatures(sig, c.providers);
  std::vector<oracle::Product> products = {
      {"cam", {{"HG1", std::nullopt, 443}, {std::nullopt, parse_prefix("2a00:2000::/32"), 8883}}},
      {"hub", {{"EDGE", std::nullopt, std::nullopt}, {"WIDE", std::nullopt, 123}}},
  };
  if (seed % 2) c.ctx.product_ouis = {Oui{0x00aa02}, Oui{0x00aa06}};
  c.options.min_hits = 1 + seed % 2;
  c.options.periphery.min_eui64_iids = 16;
  c.options.top_ouis = 3;
  c.options.heatmap_ouis = 3;
  c.options.heatmap_ports = 4;
  c.options.bucket_seconds = 1800;

  const std::uint32_t ouis[] = {0x00aa01, 0x00aa02, 0x00aa04, 0x00aa05, 0x00aa06, 0x00aa07};
  const std::uint16_t ports[] = {443, 80, 8883, 123, 53, 22};
  const std::uint64_t dst_hi[] = {0x2a00100000000000ULL, 0x2a00100000050000ULL, 0x2a00200000000000ULL,
                                  0x2a00ff0000000000ULL, 0x2001db8ff0000000ULL};
  const std::size_t n = 2000 + seed * 1000;
  for (std::size_t i = 0; i < n; ++i) {
    FlowRecord f;
    f.timestamp = 1626220800 + static_cast<std::int64_t>(rng() % 14400);
    const std::uint64_t n56 = rng() % 40;
    std::uint64_t iid;
    if (n56 == 0) {
      iid = eui(0x00aa01, static_cast<std::uint32_t>(rng() % 40));  // CPE-dense
    } else if (rng() % 3 == 0) {
      iid = eui(ouis[rng() % 6], static_cast<std::uint32_t>(rng() % 25));
    } else {
      iid = (rng() & ~0x0200000000000000ULL) | 0x1;
      if (rng() % 4 == 0) iid = rng() % 50;  // repeated small privacy IIDs
    }
    f.src = Address128{0x20010db800000000ULL | (n56 << 8) | (rng() % 3), iid};
    f.dst = Address128{dst_hi[rng() % 5], rng()};
    f.protocol = rng() % 5 ? kProtoTcp : kProtoUdp;
    f.src_port = static_cast<std::uint16_t>(rng());
    f.dst_port = ports[rng() % 6];
    f.packets = 1 + rng() % 5;
    f.bytes = f.packets * 100;
    c.flows.push_back(f);
  }
  c.seal(rules, products);
}

}  // namespace fixture

#pragma once

// Brute-force recomputation of every analysis table straight from raw flow
// records. Shares no aggregation code with the library: ordered containers,
// linear-scan prefix matching, BFS components, its own SipHash call.

#include <optional>
#include <string>
#include <vector>

#include "eui64leak/analysis.hpp"

namespace oracle {

struct Element {
  std::optional<std::string> provider;
  std::optional<eui64leak::Prefix> prefix;
  std::optional<std::uint16_t> port;
};

struct Product {
  std::string id;
  std::vector<Element> elements;
};

struct Inputs {
  std::vector<eui64leak::FlowRecord> flows;
  const eui64leak::OuiDatabase* db = nullptr;
  const eui64leak::Taxonomy* taxonomy = nullptr;
  std::vector<std::pair<eui64leak::Prefix, std::string>> provider_rules;  // later rules win on equal prefixes
  std::vector<Product> products;
  std::vector<eui64leak::Oui> product_ouis;
  eui64leak::AnonymizeSide side = eui64leak::AnonymizeSide::None;
  std::array<std::uint8_t, 16> key{};
  eui64leak::AnalysisOptions options;
};

struct Tables {
  std::vector<eui64leak::VennRow> venn;
  std::vector<eui64leak::OuiPopularityRow> oui_popularity;
  eui64leak::ShareTable category_shares;
  eui64leak::ShareTable iot_composition;
  eui64leak::CollateralResult collateral;
  eui64leak::MqttResult mqtt;
  eui64leak::PortHeatmap ports;
  std::vector<eui64leak::ProductSeries> timeseries;
  std::vector<eui64leak::TrackingComponent> tracking;
  std::vector<std::uint64_t> periphery;
  std::array<std::uint64_t, 65> hamming_histogram{};
  std::uint64_t hamming_sample = 0;
};

Tables recompute(const Inputs& in);

// Names of the tables in `report` that differ from `t`; empty when equal.
std::vector<std::string> differences(const Tables& t, const eui64leak::AnalysisReport& report);

}  // namespace oracle

#pragma once

// Aggregate statistics over prefix profiles and raw flow observations.
//
// Every aggregation is built as shard-local state (FlowAccumulator) merged
// with set union / min, so results do not depend on input order or on how
// the input was sharded.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "eui64leak/address.hpp"
#include "eui64leak/flows.hpp"
#include "eui64leak/oui.hpp"
#include "eui64leak/tracker.hpp"

namespace eui64leak {

using Rational = boost::multiprecision::cpp_rational;

// ---------------------------------------------------------------------------
// Provider attribution: longest-prefix match over destination prefixes.
// File lines: prefix/len,provider_id

class ProviderMap {
 public:
  static ProviderMap load(std::istream& in);
  static ProviderMap load_file(const std::filesystem::path& path);

  // Re-adding an identical prefix replaces its provider (counted in stats).
  ProviderIndex add(const Prefix& prefix, std::string_view provider_id);

  std::optional<ProviderIndex> lookup(const Address128& addr) const;
  std::optional<ProviderIndex> find_provider(std::string_view provider_id) const;
  const std::string& name(ProviderIndex index) const { return names_.at(index); }
  std::size_t provider_count() const noexcept { return names_.size(); }
  // Provider indices ordered by provider name.
  std::vector<ProviderIndex> by_name() const;

  const std::vector<std::pair<Prefix, ProviderIndex>>& rules() const noexcept { return rules_; }
  const LoadStats& stats() const noexcept { return stats_; }

 private:
  struct Level {
    int length;
    std::unordered_map<Address128, ProviderIndex, Address128Hash> routes;
  };

  std::vector<std::string> names_;
  std::unordered_map<std::string, ProviderIndex> name_index_;
  std::vector<std::pair<Prefix, ProviderIndex>> rules_;
  std::vector<Level> levels_;  // longest first
  LoadStats stats_;
};

// ---------------------------------------------------------------------------
// Destination signatures for product annotation.
// File lines: product_id,provider_id_or_prefix,port?

struct SignatureElement {
  std::optional<ProviderIndex> provider;
  std::optional<Prefix> prefix;
  std::optional<std::uint16_t> port;

  bool matches(std::optional<ProviderIndex> dst_provider, const Address128& dst, std::uint16_t dst_port) const;

  friend bool operator==(const SignatureElement&, const SignatureElement&) = default;
};

struct ProductSignature {
  std::string product_id;
  std::vector<SignatureElement> elements;
};

// Products sorted by id. Unknown provider names are a ParseError.
std::vector<ProductSignature> load_signatures(std::istream& in, const ProviderMap& providers);

// ---------------------------------------------------------------------------
// Shard-local accumulation.

struct SourceKey {
  PrefixToken token = 0;
  std::uint8_t subnet = 0;
  std::uint64_t iid = 0;

  friend auto operator<=>(const SourceKey&, const SourceKey&) = default;
};

struct SourceKeyHash {
  std::size_t operator()(const SourceKey& k) const noexcept {
    return Address128Hash{}(Address128{k.token << 8 | k.subnet, k.iid});
  }
};

struct PairHash {
  std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& p) const noexcept {
    return Address128Hash{}(Address128{p.first, p.second});
  }
};
using PairSet = std::unordered_set<std::pair<std::uint64_t, std::uint64_t>, PairHash>;

inline constexpr std::uint16_t kMqttTlsPort = 8883;

struct AnalysisContext {
  const ProviderMap* providers = nullptr;
  std::vector<ProductSignature> products;
  std::vector<Oui> product_ouis;  // restricts EUI-64 product sources; empty = any
  AnonymizeSide anonymize_side = AnonymizeSide::Src;
  std::optional<AnonymizationKey> key;  // required unless side is None
};

class FlowAccumulator {
 public:
  explicit FlowAccumulator(const AnalysisContext& ctx);

  void add(const FlowRecord& flow);
  void merge(FlowAccumulator&& other);

  const ProfileStore& profiles() const noexcept { return profiles_; }
  // (prefix token, IID) of TCP/8883 sources.
  const PairSet& mqtt_sources() const noexcept { return mqtt_; }
  // (EUI-64 IID, destination port).
  const PairSet& port_sources() const noexcept { return ports_; }
  // Per product: source -> earliest hit time per signature element
  // (INT64_MAX when never hit).
  const std::vector<std::unordered_map<SourceKey, std::vector<std::int64_t>, SourceKeyHash>>& product_hits() const noexcept {
    return product_hits_;
  }
  const AnalysisContext& context() const noexcept { return *ctx_; }

  std::uint64_t flows() const noexcept { return flows_; }
  std::int64_t window_start() const noexcept { return window_min_; }
  std::int64_t window_end() const noexcept { return window_max_; }

 private:
  const AnalysisContext* ctx_;
  ProfileStore profiles_;
  PairSet mqtt_;
  PairSet ports_;
  std::vector<std::unordered_map<SourceKey, std::vector<std::int64_t>, SourceKeyHash>> product_hits_;
  std::unordered_set<Oui> product_ouis_;
  std::uint64_t flows_ = 0;
  std::int64_t window_min_ = INT64_MAX;
  std::int64_t window_max_ = INT64_MIN;
};

// ---------------------------------------------------------------------------
// Result tables.

using ProfileSpan = std::span<const PrefixProfile* const>;

enum class VennLevel { Address, Slash64, Slash56 };

struct VennCounts {
  std::uint64_t eui64_only = 0;
  std::uint64_t both = 0;
  std::uint64_t non_eui64_only = 0;

  friend bool operator==(const VennCounts&, const VennCounts&) = default;
};

// With `linkage` at /56, each tracking component counts once, classified by
// the union of its members' IIDs. Addresses are never both types, so the
// address level always reports both = 0.
VennCounts venn_counts(ProfileSpan profiles, VennLevel level, const TrackingTable* linkage = nullptr);

struct OuiPopularityRow {
  Oui oui;
  std::string organization;
  std::uint64_t distinct_iids = 0;
  std::uint64_t distinct_64s = 0;
  std::uint64_t distinct_56s = 0;

  friend bool operator==(const OuiPopularityRow&, const OuiPopularityRow&) = default;
};

// Sorted by distinct IIDs descending (ties by OUI); `top_n` = 0 keeps all.
std::vector<OuiPopularityRow> oui_popularity(ProfileSpan profiles, const OuiDatabase& db, std::size_t top_n = 0);

struct ShareRow {
  std::string label;
  std::uint64_t prefixes = 0;  // prefixes carrying this label at all
  Rational weight;             // sum of equal-split weights
  double share = 0.0;          // weight / total prefixes

  friend bool operator==(const ShareRow&, const ShareRow&) = default;
};

struct ShareTable {
  std::uint64_t total_prefixes = 0;
  std::vector<ShareRow> rows;  // sorted by label

  friend bool operator==(const ShareTable&, const ShareTable&) = default;
};

// Each prefix contributes weight 1 split equally over its distinct labels.
class EqualSplitWeights {
 public:
  void add_prefix(const std::vector<std::string>& distinct_labels);
  ShareTable table() const;

 private:
  std::uint64_t total_ = 0;
  std::map<std::string, std::map<std::size_t, std::uint64_t>> by_label_;  // label -> (split k -> prefixes)
};

// Over prefixes with >= 1 EUI-64 IID; labels are manufacturer category
// combinations ("IoT|Computers").
ShareTable category_shares(ProfileSpan profiles, const Taxonomy& taxonomy);

// Over prefixes hosting >= 1 manufacturer whose category set is exactly {IoT};
// labels are those manufacturers' IoT subcategories ("Unspecified" if absent).
ShareTable iot_composition(ProfileSpan profiles, const Taxonomy& taxonomy);

inline constexpr std::string_view kUnspecifiedIoT = "Unspecified";

struct TimeWindow {
  std::int64_t start = 0;  // inclusive, aligned to the bucket
  std::int64_t end = 0;    // exclusive
  std::int64_t bucket = 3600;

  std::size_t bucket_count() const noexcept {
    return bucket > 0 && end > start ? static_cast<std::size_t>((end - start) / bucket) : 0;
  }
  // Bucket-aligned window covering [first, last].
  static TimeWindow covering(std::int64_t first, std::int64_t last, std::int64_t bucket);
};

struct SeriesPoint {
  std::int64_t bucket_start = 0;
  std::uint64_t eui64_addresses = 0;
  std::uint64_t eui64_iids = 0;
  std::uint64_t other_addresses = 0;
  std::uint64_t other_iids = 0;

  friend bool operator==(const SeriesPoint&, const SeriesPoint&) = default;
};

struct ProductSeries {
  std::string product_id;
  std::vector<SeriesPoint> points;

  friend bool operator==(const ProductSeries&, const ProductSeries&) = default;
};

// Cumulative distinct sources (addresses and IIDs) matched to each product by
// the end of each bucket. A source matches once it has hit `min_hits`
// distinct signature elements.
std::vector<ProductSeries> product_timeseries(const FlowAccumulator& acc, std::size_t min_hits,
                                              const TimeWindow& window);

struct MqttResult {
  std::uint64_t eui64_sources = 0;
  std::uint64_t total_sources = 0;
  std::optional<double> fraction;  // empty when no TCP/8883 sources

  friend bool operator==(const MqttResult&, const MqttResult&) = default;
};

MqttResult mqtt_proxy(const PairSet& mqtt_sources);

struct CollateralRow {
  std::string provider_id;  // "*" = any provider
  std::uint64_t prefixes = 0;
  double fraction = 0.0;  // of end-user prefixes

  friend bool operator==(const CollateralRow&, const CollateralRow&) = default;
};

struct CollateralPoint {
  std::int64_t bucket_start = 0;
  std::string provider_id;
  std::uint64_t cumulative_prefixes = 0;

  friend bool operator==(const CollateralPoint&, const CollateralPoint&) = default;
};

struct CollateralResult {
  std::uint64_t end_user_prefixes = 0;
  std::uint64_t dual_type_prefixes = 0;
  std::vector<CollateralRow> rows;  // by provider name, then "*"
  std::vector<CollateralPoint> series;

  friend bool operator==(const CollateralResult&, const CollateralResult&) = default;
};

// A prefix counts for provider P when at least one EUI-64 source and at least
// one non-EUI-64 source of the prefix contacted P. It enters the cumulative
// series at the later of the two first contacts.
CollateralResult collateral_leakage(ProfileSpan end_user_profiles, const ProviderMap& providers,
                                    const TimeWindow& window);

inline constexpr int kHammingBins = 65;

struct HammingFit {
  std::array<std::uint64_t, kHammingBins> histogram{};
  std::uint64_t sample_size = 0;
  double mean = 0.0;
  bool sufficient = false;
  double chi_square = 0.0;
  int degrees_of_freedom = 0;
  double p_value = 0.0;
  std::vector<std::pair<int, int>> bins;  // pooled [lo, hi] weight ranges
};

// Expected share of Hamming weight `k` for a 64-bit IID with the U/L bit
// fixed at zero and the other 63 bits uniform: Binomial(63, 1/2).
double hamming_reference_pmf(int k);

HammingFit hamming_fit(std::span<const std::uint64_t> iids, std::size_t min_sample = 10000);

// Chi-square survival function P[X >= x] for `dof` degrees of freedom.
double chi_square_sf(double x, int dof);

struct PortHeatmap {
  std::vector<Oui> ouis;
  std::vector<std::string> organizations;
  std::vector<std::uint16_t> ports;
  std::vector<std::vector<std::uint64_t>> counts;  // [oui][port]: distinct IIDs

  friend bool operator==(const PortHeatmap&, const PortHeatmap&) = default;
};

PortHeatmap port_heatmap(const PairSet& eui64_port_sources, const OuiDatabase& db, std::size_t top_ouis,
                         std::size_t top_ports);

// ---------------------------------------------------------------------------
// Full report.

struct AnalysisOptions {
  PeripheryThresholds periphery;
  std::size_t top_ouis = 50;
  std::size_t heatmap_ouis = 50;
  std::size_t heatmap_ports = 20;
  std::int64_t bucket_seconds = 3600;
  std::size_t hamming_min_sample = 10000;
  std::size_t min_hits = 1;
};

struct IngestStats {
  std::uint64_t lines = 0;
  std::uint64_t records = 0;
  std::uint64_t skipped_non_ipv6 = 0;
  std::uint64_t malformed = 0;
  std::vector<std::pair<std::size_t, std::string>> errors;  // first few, by line

  void merge(const IngestStats& other);
};

struct VennRow {
  std::string scope;
  std::string level;
  VennCounts counts;

  friend bool operator==(const VennRow&, const VennRow&) = default;
};

struct AnalysisReport {
  std::vector<VennRow> venn;
  std::vector<OuiPopularityRow> oui_popularity;
  ShareTable category_shares;
  ShareTable iot_composition;
  CollateralResult collateral;
  HammingFit hamming;
  PortHeatmap ports;
  std::vector<ProductSeries> timeseries;
  MqttResult mqtt;
  TrackingTable tracking;
  std::vector<PrefixToken> periphery;  // ascending
  std::vector<std::pair<std::string, std::string>> summary;
};

AnalysisReport build_report(const FlowAccumulator& acc, const OuiDatabase& db, const Taxonomy& taxonomy,
                            const ProviderMap& providers, const AnalysisOptions& options, const IngestStats& stats);

}  // namespace eui64leak

#include "eui64leak/analysis.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <set>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include "eui64leak/errors.hpp"
#include "eui64leak/text.hpp"

namespace eui64leak {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::string fixed6(double v) { return fmt::format("{:.6f}", v); }

}  // namespace

// ---------------------------------------------------------------------------
// ProviderMap

ProviderIndex ProviderMap::add(const Prefix& prefix, std::string_view provider_id) {
  auto [name_it, fresh] = name_index_.try_emplace(std::string(provider_id), static_cast<ProviderIndex>(names_.size()));
  if (fresh) names_.emplace_back(provider_id);
  ProviderIndex idx = name_it->second;
  rules_.emplace_back(prefix, idx);

  auto level = std::find_if(levels_.begin(), levels_.end(), [&](const Level& l) { return l.length == prefix.length; });
  if (level == levels_.end()) {
    levels_.push_back(Level{prefix.length, {}});
    std::sort(levels_.begin(), levels_.end(), [](const Level& a, const Level& b) { return a.length > b.length; });
    level = std::find_if(levels_.begin(), levels_.end(), [&](const Level& l) { return l.length == prefix.length; });
  }
  auto [it, inserted] = level->routes.insert_or_assign(prefix.bits, idx);
  if (!inserted) ++stats_.duplicates;
  ++stats_.records;
  return idx;
}

ProviderMap ProviderMap::load(std::istream& in) {
  ProviderMap map;
  std::string line;
  while (std::getline(in, line)) {
    if (text::is_comment_or_blank(line)) continue;
    auto fields = text::split_csv(line);
    if (!fields || fields->size() != 2 || (*fields)[1].empty()) {
      ++map.stats_.skipped;
      continue;
    }
    try {
      map.add(parse_prefix((*fields)[0]), (*fields)[1]);
    } catch (const ParseError&) {
      ++map.stats_.skipped;
    }
  }
  if (in.bad()) throw IoError("error while reading provider map");
  return map;
}

ProviderMap ProviderMap::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()));
  return load(in);
}

std::optional<ProviderIndex> ProviderMap::lookup(const Address128& addr) const {
  for (const auto& level : levels_) {
    auto it = level.routes.find(mask_address(addr, level.length));
    if (it != level.routes.end()) return it->second;
  }
  return std::nullopt;
}

std::optional<ProviderIndex> ProviderMap::find_provider(std::string_view provider_id) const {
  auto it = name_index_.find(std::string(provider_id));
  if (it == name_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<ProviderIndex> ProviderMap::by_name() const {
  std::vector<ProviderIndex> out(names_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<ProviderIndex>(i);
  std::sort(out.begin(), out.end(), [&](auto a, auto b) { return names_[a] < names_[b]; });
  return out;
}

// ---------------------------------------------------------------------------
// Signatures

bool SignatureElement::matches(std::optional<ProviderIndex> dst_provider, const Address128& dst,
                               std::uint16_t dst_port) const {
  if (port && *port != dst_port) return false;
  if (provider) return dst_provider == provider;
  if (prefix) return contains(*prefix, dst);
  return false;
}

std::vector<ProductSignature> load_signatures(std::istream& in, const ProviderMap& providers) {
  std::map<std::string, std::vector<SignatureElement>> products;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::is_comment_or_blank(line)) continue;
    auto fields = text::split_csv(line);
    if (!fields || fields->size() < 2 || fields->size() > 3 || (*fields)[0].empty()) {
      throw ParseError(fmt::format("signatures line {}: expected product_id,target[,port]", line_no), line_no);
    }
    SignatureElement e;
    const auto& target = (*fields)[1];
    if (target.find('/') != std::string::npos) {
      try {
        e.prefix = parse_prefix(target);
      } catch (const ParseError& err) {
        throw ParseError(fmt::format("signatures line {}: {}", line_no, err.what()), line_no);
      }
    } else {
      e.provider = providers.find_provider(target);
      if (!e.provider) {
        throw ParseError(fmt::format("signatures line {}: unknown provider '{}'", line_no, target), line_no);
      }
    }
    if (fields->size() == 3 && !(*fields)[2].empty()) {
      auto port = text::parse_number<unsigned>((*fields)[2]);
      if (!port || *port > 65535) throw ParseError(fmt::format("signatures line {}: invalid port", line_no), line_no);
      e.port = static_cast<std::uint16_t>(*port);
    }
    products[(*fields)[0]].push_back(e);
  }
  std::vector<ProductSignature> out;
  for (auto& [id, elems] : products) out.push_back(ProductSignature{id, std::move(elems)});
  return out;
}

// ---------------------------------------------------------------------------
// FlowAccumulator

FlowAccumulator::FlowAccumulator(const AnalysisContext& ctx)
    : ctx_(&ctx), product_hits_(ctx.products.size()), product_ouis_(ctx.product_ouis.begin(), ctx.product_ouis.end()) {
  if (ctx.anonymize_side != AnonymizeSide::None && !ctx.key) {
    throw InvalidInput("anonymization requested but no key supplied");
  }
}

void FlowAccumulator::add(const FlowRecord& flow) {
  ++flows_;
  window_min_ = std::min(window_min_, flow.timestamp);
  window_max_ = std::max(window_max_, flow.timestamp);

  const auto side = ctx_->anonymize_side;
  AnonymizedAddress src = (side == AnonymizeSide::Src || side == AnonymizeSide::Both) ? anonymize(flow.src, *ctx_->key)
                                                                                      : passthrough(flow.src);
  Address128 dst = (side == AnonymizeSide::Dst || side == AnonymizeSide::Both)
                       ? anonymize(flow.dst, *ctx_->key).to_address()
                       : flow.dst;
  std::optional<ProviderIndex> provider;
  if (ctx_->providers) provider = ctx_->providers->lookup(dst);

  profiles_.accumulate(src, flow.timestamp, provider);
  const bool eui = is_eui64(src.iid);
  if (flow.protocol == kProtoTcp && flow.dst_port == kMqttTlsPort) mqtt_.emplace(src.prefix_token, src.iid.bits);
  if (eui) ports_.emplace(src.iid.bits, flow.dst_port);

  if (ctx_->products.empty()) return;
  if (eui && !product_ouis_.empty() && !product_ouis_.contains(oui_of_eui64(src.iid.bits))) return;
  const SourceKey key{src.prefix_token, src.subnet_id, src.iid.bits};
  for (std::size_t p = 0; p < ctx_->products.size(); ++p) {
    const auto& elems = ctx_->products[p].elements;
    for (std::size_t e = 0; e < elems.size(); ++e) {
      if (!elems[e].matches(provider, dst, flow.dst_port)) continue;
      auto& times = product_hits_[p][key];
      if (times.empty()) times.assign(elems.size(), INT64_MAX);
      times[e] = std::min(times[e], flow.timestamp);
    }
  }
}

void FlowAccumulator::merge(FlowAccumulator&& other) {
  profiles_.merge(std::move(other.profiles_));
  mqtt_.merge(other.mqtt_);
  ports_.merge(other.ports_);
  for (std::size_t p = 0; p < product_hits_.size(); ++p) {
    for (auto& [key, times] : other.product_hits_[p]) {
      auto [it, inserted] = product_hits_[p].try_emplace(key, times);
      if (inserted) continue;
      for (std::size_t e = 0; e < times.size(); ++e) it->second[e] = std::min(it->second[e], times[e]);
    }
  }
  flows_ += other.flows_;
  window_min_ = std::min(window_min_, other.window_min_);
  window_max_ = std::max(window_max_, other.window_max_);
}

// ---------------------------------------------------------------------------
// Venn

VennCounts venn_counts(ProfileSpan profiles, VennLevel level, const TrackingTable* linkage) {
  VennCounts out;
  auto tally = [&out](bool eui, bool other) {
    if (eui && other) ++out.both;
    else if (eui) ++out.eui64_only;
    else if (other) ++out.non_eui64_only;
  };

  switch (level) {
    case VennLevel::Address:
      for (const auto* p : profiles) {
        for (const auto& [_, s] : p->eui64_iids) out.eui64_only += s.count();
        for (const auto& [_, s] : p->other_iids) out.non_eui64_only += s.count();
      }
      break;
    case VennLevel::Slash64:
      for (const auto* p : profiles) {
        SubnetSet eui, other;
        for (const auto& [_, s] : p->eui64_iids) eui |= s;
        for (const auto& [_, s] : p->other_iids) other |= s;
        for (std::size_t i = 0; i < 256; ++i) tally(eui.test(i), other.test(i));
      }
      break;
    case VennLevel::Slash56:
      if (!linkage) {
        for (const auto* p : profiles) tally(!p->eui64_iids.empty(), !p->other_iids.empty());
        break;
      }
      {
        std::map<std::size_t, std::pair<bool, bool>> components;
        for (const auto* p : profiles) {
          auto comp = linkage->component_of(p->token);
          if (!comp) {
            tally(!p->eui64_iids.empty(), !p->other_iids.empty());
            continue;
          }
          auto& flags = components[*comp];
          flags.first |= !p->eui64_iids.empty();
          flags.second |= !p->other_iids.empty();
        }
        for (const auto& [_, f] : components) tally(f.first, f.second);
      }
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// OUI popularity

std::vector<OuiPopularityRow> oui_popularity(ProfileSpan profiles, const OuiDatabase& db, std::size_t top_n) {
  struct Acc {
    std::unordered_set<std::uint64_t> iids, s64, s56;
  };
  std::unordered_map<Oui, Acc> by_oui;
  for (const auto* p : profiles) {
    for (const auto& [iid, subnets] : p->eui64_iids) {
      auto& a = by_oui[oui_of_eui64(iid)];
      a.iids.insert(iid);
      a.s56.insert(p->token);
      for (std::size_t s = 0; s < 256; ++s) {
        if (subnets.test(s)) a.s64.insert(p->token << 8 | s);
      }
    }
  }
  std::vector<OuiPopularityRow> rows;
  rows.reserve(by_oui.size());
  for (const auto& [oui, a] : by_oui) {
    rows.push_back(OuiPopularityRow{oui, db.organization(oui), a.iids.size(), a.s64.size(), a.s56.size()});
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.distinct_iids != b.distinct_iids) return a.distinct_iids > b.distinct_iids;
    return a.oui < b.oui;
  });
  if (top_n > 0 && rows.size() > top_n) rows.resize(top_n);
  return rows;
}

// ---------------------------------------------------------------------------
// Category shares

void EqualSplitWeights::add_prefix(const std::vector<std::string>& labels) {
  ++total_;
  for (const auto& l : labels) ++by_label_[l][labels.size()];
}

ShareTable EqualSplitWeights::table() const {
  ShareTable t;
  t.total_prefixes = total_;
  for (const auto& [label, splits] : by_label_) {
    ShareRow row;
    row.label = label;
    for (const auto& [k, count] : splits) {
      row.prefixes += count;
      row.weight += Rational(count) / k;
    }
    row.share = total_ ? Rational(row.weight / total_).convert_to<double>() : 0.0;
    t.rows.push_back(std::move(row));
  }
  return t;
}

ShareTable category_shares(ProfileSpan profiles, const Taxonomy& taxonomy) {
  EqualSplitWeights weights;
  for (const auto* p : profiles) {
    if (p->eui64_iids.empty()) continue;
    std::set<std::string> labels;
    for (const auto& [oui, _] : p->manufacturers()) labels.insert(taxonomy.categorize(oui).categories.to_string());
    weights.add_prefix({labels.begin(), labels.end()});
  }
  return weights.table();
}

ShareTable iot_composition(ProfileSpan profiles, const Taxonomy& taxonomy) {
  EqualSplitWeights weights;
  for (const auto* p : profiles) {
    std::set<std::string> labels;
    for (const auto& [oui, _] : p->manufacturers()) {
      auto entry = taxonomy.categorize(oui);
      if (!entry.categories.only(DeviceCategory::IoT)) continue;
      labels.insert(entry.iot ? std::string(to_string(*entry.iot)) : std::string(kUnspecifiedIoT));
    }
    if (!labels.empty()) weights.add_prefix({labels.begin(), labels.end()});
  }
  return weights.table();
}

// ---------------------------------------------------------------------------
// Time series

TimeWindow TimeWindow::covering(std::int64_t first, std::int64_t last, std::int64_t bucket) {
  if (bucket <= 0) throw ContractViolation("bucket must be positive");
  if (first > last) return TimeWindow{0, 0, bucket};
  return TimeWindow{floor_div(first, bucket) * bucket, (floor_div(last, bucket) + 1) * bucket, bucket};
}

namespace {

std::size_t bucket_of(const TimeWindow& w, std::int64_t t) {
  std::int64_t b = floor_div(t - w.start, w.bucket);
  if (b < 0) return 0;
  return std::min(static_cast<std::size_t>(b), w.bucket_count() - 1);
}

// Turns per-bucket arrival counts into running totals.
std::vector<std::uint64_t> cumulate(std::vector<std::uint64_t> counts) {
  for (std::size_t i = 1; i < counts.size(); ++i) counts[i] += counts[i - 1];
  return counts;
}

}  // namespace

std::vector<ProductSeries> product_timeseries(const FlowAccumulator& acc, std::size_t min_hits,
                                              const TimeWindow& window) {
  min_hits = std::max<std::size_t>(min_hits, 1);
  const auto& products = acc.context().products;
  std::vector<ProductSeries> out;
  const std::size_t nb = window.bucket_count();
  for (std::size_t p = 0; p < products.size(); ++p) {
    std::vector<std::uint64_t> eui_addr(nb), eui_iid(nb), oth_addr(nb), oth_iid(nb);
    std::unordered_map<std::uint64_t, std::int64_t> iid_first;
    for (const auto& [key, times] : acc.product_hits()[p]) {
      std::vector<std::int64_t> hit;
      for (auto t : times) {
        if (t != INT64_MAX) hit.push_back(t);
      }
      if (hit.size() < min_hits || nb == 0) continue;
      std::nth_element(hit.begin(), hit.begin() + static_cast<std::ptrdiff_t>(min_hits - 1), hit.end());
      std::int64_t matched_at = hit[min_hits - 1];
      bool eui = is_eui64(Iid64{key.iid});
      ++(eui ? eui_addr : oth_addr)[bucket_of(window, matched_at)];
      auto [it, inserted] = iid_first.try_emplace(key.iid, matched_at);
      if (!inserted) it->second = std::min(it->second, matched_at);
    }
    for (const auto& [iid, t] : iid_first) ++(is_eui64(Iid64{iid}) ? eui_iid : oth_iid)[bucket_of(window, t)];
    eui_addr = cumulate(std::move(eui_addr));
    eui_iid = cumulate(std::move(eui_iid));
    oth_addr = cumulate(std::move(oth_addr));
    oth_iid = cumulate(std::move(oth_iid));
    ProductSeries s{products[p].product_id, {}};
    for (std::size_t b = 0; b < nb; ++b) {
      s.points.push_back(SeriesPoint{window.start + static_cast<std::int64_t>(b) * window.bucket, eui_addr[b],
                                     eui_iid[b], oth_addr[b], oth_iid[b]});
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// MQTT

MqttResult mqtt_proxy(const PairSet& sources) {
  MqttResult r;
  r.total_sources = sources.size();
  for (const auto& [token, iid] : sources) r.eui64_sources += is_eui64(Iid64{iid}) ? 1 : 0;
  if (r.total_sources > 0) r.fraction = static_cast<double>(r.eui64_sources) / static_cast<double>(r.total_sources);
  return r;
}

// ---------------------------------------------------------------------------
// Collateral leakage

CollateralResult collateral_leakage(ProfileSpan profiles, const ProviderMap& providers, const TimeWindow& window) {
  CollateralResult r;
  r.end_user_prefixes = profiles.size();
  const std::size_t np = providers.provider_count();
  const std::size_t nb = window.bucket_count();
  std::vector<std::uint64_t> totals(np + 1, 0);
  std::vector<std::vector<std::uint64_t>> arrivals(np + 1, std::vector<std::uint64_t>(nb, 0));

  for (const auto* p : profiles) {
    if (!p->eui64_iids.empty() && !p->other_iids.empty()) ++r.dual_type_prefixes;
    std::int64_t earliest = INT64_MAX;
    for (const auto& [provider, t_eui] : p->eui64_contacts) {
      auto it = p->other_contacts.find(provider);
      if (it == p->other_contacts.end()) continue;
      std::int64_t exposed_at = std::max(t_eui, it->second);
      ++totals[provider];
      if (nb) ++arrivals[provider][bucket_of(window, exposed_at)];
      earliest = std::min(earliest, exposed_at);
    }
    if (earliest != INT64_MAX) {
      ++totals[np];
      if (nb) ++arrivals[np][bucket_of(window, earliest)];
    }
  }

  auto fraction = [&](std::uint64_t n) {
    return r.end_user_prefixes ? static_cast<double>(n) / static_cast<double>(r.end_user_prefixes) : 0.0;
  };
  std::vector<std::pair<std::string, std::size_t>> order;
  for (auto idx : providers.by_name()) order.emplace_back(providers.name(idx), idx);
  order.emplace_back("*", np);

  for (const auto& [name, idx] : order) r.rows.push_back(CollateralRow{name, totals[idx], fraction(totals[idx])});
  std::vector<std::vector<std::uint64_t>> cumulative;
  for (const auto& [name, idx] : order) cumulative.push_back(cumulate(arrivals[idx]));
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t i = 0; i < order.size(); ++i) {
      r.series.push_back(
          CollateralPoint{window.start + static_cast<std::int64_t>(b) * window.bucket, order[i].first, cumulative[i][b]});
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Hamming weight fit

double hamming_reference_pmf(int k) {
  if (k < 0 || k > 63) return 0.0;
  static const boost::math::binomial_distribution<double> dist(63, 0.5);
  return boost::math::pdf(dist, k);
}

double chi_square_sf(double x, int dof) {
  if (dof <= 0) throw ContractViolation("chi-square needs at least one degree of freedom");
  if (x <= 0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

HammingFit hamming_fit(std::span<const std::uint64_t> iids, std::size_t min_sample) {
  HammingFit fit;
  std::uint64_t weight_sum = 0;
  for (auto iid : iids) {
    int w = hamming_weight(Iid64{iid});
    ++fit.histogram[w];
    weight_sum += static_cast<std::uint64_t>(w);
  }
  fit.sample_size = iids.size();
  fit.mean = fit.sample_size ? static_cast<double>(weight_sum) / static_cast<double>(fit.sample_size) : 0.0;
  fit.sufficient = fit.sample_size >= min_sample && fit.sample_size > 0;
  if (!fit.sufficient) return fit;

  const double n = static_cast<double>(fit.sample_size);
  // Greedy left-to-right pooling until each bin expects >= 5; a short tail
  // is folded into the last closed bin.
  std::vector<std::pair<int, int>> bins;
  std::vector<double> expected, observed;
  int lo = 0;
  double e = 0, o = 0;
  for (int k = 0; k < kHammingBins; ++k) {
    e += n * hamming_reference_pmf(k);
    o += static_cast<double>(fit.histogram[k]);
    if (e >= 5.0) {
      bins.emplace_back(lo, k);
      expected.push_back(e);
      observed.push_back(o);
      lo = k + 1;
      e = o = 0;
    }
  }
  if (lo < kHammingBins) {
    if (bins.empty()) {
      bins.emplace_back(lo, kHammingBins - 1);
      expected.push_back(e);
      observed.push_back(o);
    } else {
      bins.back().second = kHammingBins - 1;
      expected.back() += e;
      observed.back() += o;
    }
  }

  double chi2 = 0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    double d = observed[i] - expected[i];
    chi2 += d * d / expected[i];
  }
  fit.bins = std::move(bins);
  fit.chi_square = chi2;
  fit.degrees_of_freedom = static_cast<int>(fit.bins.size()) - 1;
  fit.p_value = fit.degrees_of_freedom > 0 ? chi_square_sf(chi2, fit.degrees_of_freedom) : 1.0;
  return fit;
}

// ---------------------------------------------------------------------------
// Port heatmap

PortHeatmap port_heatmap(const PairSet& sources, const OuiDatabase& db, std::size_t top_ouis, std::size_t top_ports) {
  std::unordered_map<Oui, std::unordered_set<std::uint64_t>> iids_by_oui;
  std::unordered_map<std::uint16_t, std::uint64_t> per_port;
  for (const auto& [iid, port] : sources) {
    iids_by_oui[oui_of_eui64(iid)].insert(iid);
    ++per_port[static_cast<std::uint16_t>(port)];
  }

  std::vector<std::pair<Oui, std::uint64_t>> ouis;
  for (const auto& [oui, s] : iids_by_oui) ouis.emplace_back(oui, s.size());
  std::sort(ouis.begin(), ouis.end(), [](auto& a, auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
  if (ouis.size() > top_ouis) ouis.resize(top_ouis);

  std::vector<std::pair<std::uint16_t, std::uint64_t>> ports(per_port.begin(), per_port.end());
  std::sort(ports.begin(), ports.end(), [](auto& a, auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
  if (ports.size() > top_ports) ports.resize(top_ports);

  PortHeatmap h;
  std::unordered_map<Oui, std::size_t> row;
  std::unordered_map<std::uint16_t, std::size_t> col;
  for (const auto& [oui, _] : ouis) {
    row.emplace(oui, h.ouis.size());
    h.ouis.push_back(oui);
    h.organizations.push_back(db.organization(oui));
  }
  for (const auto& [port, _] : ports) {
    col.emplace(port, h.ports.size());
    h.ports.push_back(port);
  }
  h.counts.assign(h.ouis.size(), std::vector<std::uint64_t>(h.ports.size(), 0));
  for (const auto& [iid, port] : sources) {
    auto r = row.find(oui_of_eui64(iid));
    auto c = col.find(static_cast<std::uint16_t>(port));
    if (r != row.end() && c != col.end()) ++h.counts[r->second][c->second];
  }
  return h;
}

// ---------------------------------------------------------------------------
// Report assembly

void IngestStats::merge(const IngestStats& o) {
  lines += o.lines;
  records += o.records;
  skipped_non_ipv6 += o.skipped_non_ipv6;
  malformed += o.malformed;
  errors.insert(errors.end(), o.errors.begin(), o.errors.end());
  std::sort(errors.begin(), errors.end());
  if (errors.size() > 20) errors.resize(20);
}

AnalysisReport build_report(const FlowAccumulator& acc, const OuiDatabase& db, const Taxonomy& taxonomy,
                            const ProviderMap& providers, const AnalysisOptions& options, const IngestStats& stats) {
  AnalysisReport r;
  const auto& store = acc.profiles();
  const PrefixTokenSet periphery = detect_periphery(store, taxonomy, options.periphery);
  r.periphery.assign(periphery.begin(), periphery.end());
  std::sort(r.periphery.begin(), r.periphery.end());

  const auto all = store.sorted();
  const auto end_user = store.sorted(&periphery);
  r.tracking = link_rotations(store, periphery);

  r.venn = {
      {"all", "address", venn_counts(all, VennLevel::Address)},
      {"all", "/64", venn_counts(all, VennLevel::Slash64)},
      {"all", "/56", venn_counts(all, VennLevel::Slash56)},
      {"end_user", "address", venn_counts(end_user, VennLevel::Address)},
      {"end_user", "/64", venn_counts(end_user, VennLevel::Slash64)},
      {"end_user", "/56", venn_counts(end_user, VennLevel::Slash56)},
      {"end_user", "/56_linked", venn_counts(end_user, VennLevel::Slash56, &r.tracking)},
  };

  r.oui_popularity = oui_popularity(all, db, options.top_ouis);
  r.category_shares = category_shares(end_user, taxonomy);
  r.iot_composition = iot_composition(end_user, taxonomy);

  const auto window = TimeWindow::covering(acc.window_start(), acc.window_end(), options.bucket_seconds);
  r.collateral = collateral_leakage(end_user, providers, window);
  r.timeseries = product_timeseries(acc, options.min_hits, window);
  r.mqtt = mqtt_proxy(acc.mqtt_sources());
  r.ports = port_heatmap(acc.port_sources(), db, options.heatmap_ouis, options.heatmap_ports);

  std::vector<std::uint64_t> privacy_iids;
  for (const auto* p : end_user) {
    for (const auto& [iid, _] : p->other_iids) privacy_iids.push_back(iid);
  }
  std::sort(privacy_iids.begin(), privacy_iids.end());
  privacy_iids.erase(std::unique(privacy_iids.begin(), privacy_iids.end()), privacy_iids.end());
  r.hamming = hamming_fit(privacy_iids, options.hamming_min_sample);

  // Headline figures.
  const auto& linked = r.venn[6].counts;
  const std::uint64_t components = linked.eui64_only + linked.both + linked.non_eui64_only;
  const std::uint64_t eui_components = linked.eui64_only + linked.both;
  std::uint64_t rotated = 0;
  for (const auto& c : r.tracking.components()) rotated += (c.tracking_iid && c.members.size() >= 2) ? 1 : 0;
  std::uint64_t end_user_eui = 0;
  for (const auto* p : end_user) end_user_eui += p->eui64_iids.empty() ? 0 : 1;

  std::set<std::string> manufacturers;
  std::set<Oui> ouis;
  for (const auto* p : all) {
    for (const auto& [oui, _] : p->manufacturers()) {
      ouis.insert(oui);
      const auto* rec = db.lookup(oui);
      manufacturers.insert(rec ? rec->organization_name : "unregistered:" + format_oui(oui));
    }
  }

  auto ratio = [](std::uint64_t a, std::uint64_t b) { return b ? fixed6(static_cast<double>(a) / static_cast<double>(b)) : std::string{}; };
  const auto& any = r.collateral.rows.back();
  std::string hamming_status = !r.hamming.sufficient ? "insufficient" : (r.hamming.p_value > 0.01 ? "consistent" : "rejected");

  r.summary = {
      {"flow_lines", std::to_string(stats.lines)},
      {"flow_records", std::to_string(stats.records)},
      {"flows_skipped_non_ipv6", std::to_string(stats.skipped_non_ipv6)},
      {"flows_malformed", std::to_string(stats.malformed)},
      {"prefixes_total", std::to_string(all.size())},
      {"periphery_prefixes", std::to_string(r.periphery.size())},
      {"end_user_prefixes", std::to_string(end_user.size())},
      {"end_user_eui64_prefixes", std::to_string(end_user_eui)},
      {"end_user_components", std::to_string(components)},
      {"end_user_eui64_components", std::to_string(eui_components)},
      {"at_risk_fraction", ratio(end_user_eui, end_user.size())},
      {"at_risk_component_fraction", ratio(eui_components, components)},
      {"dual_type_share_of_eui64", ratio(linked.both, eui_components)},
      {"rotated_components", std::to_string(rotated)},
      {"rotation_fraction", ratio(rotated, eui_components)},
      {"distinct_ouis", std::to_string(ouis.size())},
      {"distinct_manufacturers", std::to_string(manufacturers.size())},
      {"collateral_union_prefixes", std::to_string(any.prefixes)},
      {"collateral_union_fraction", ratio(any.prefixes, r.collateral.end_user_prefixes)},
      {"mqtt_eui64_sources", std::to_string(r.mqtt.eui64_sources)},
      {"mqtt_sources", std::to_string(r.mqtt.total_sources)},
      {"mqtt_eui64_fraction", r.mqtt.fraction ? fixed6(*r.mqtt.fraction) : std::string{}},
      {"hamming_sample", std::to_string(r.hamming.sample_size)},
      {"hamming_mean", fixed6(r.hamming.mean)},
      {"hamming_chi_square", r.hamming.sufficient ? fixed6(r.hamming.chi_square) : std::string{}},
      {"hamming_dof", r.hamming.sufficient ? std::to_string(r.hamming.degrees_of_freedom) : std::string{}},
      {"hamming_p_value", r.hamming.sufficient ? fmt::format("{:.6g}", r.hamming.p_value) : std::string{}},
      {"hamming_status", hamming_status},
  };
  return r;
}

}  // namespace eui64leak

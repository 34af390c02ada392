#include "eui64leak/report.hpp"

#include <fstream>

#include <fmt/format.h>

#include "eui64leak/digest.hpp"
#include "eui64leak/errors.hpp"
#include "eui64leak/text.hpp"

namespace eui64leak {

namespace {

void append(std::string& out, std::string_view s) { out.append(s); }

std::string token_hex(PrefixToken t) { return fmt::format("{:014x}", t); }

std::string share_csv(const ShareTable& t, std::string_view label_column) {
  std::string out = fmt::format("{},prefixes,weight,share,total_prefixes\n", label_column);
  for (const auto& row : t.rows) {
    fmt::format_to(std::back_inserter(out), "{},{},{},{:.6f},{}\n", text::csv_field(row.label), row.prefixes,
                   row.weight.str(), row.share, t.total_prefixes);
  }
  return out;
}

}  // namespace

std::string render_tracking_csv(const TrackingTable& table) {
  std::string out = "component_id,tracking_iid,member_prefix_tokens\n";
  const auto& comps = table.components();
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const auto& c = comps[i];
    fmt::format_to(std::back_inserter(out), "{},{},", i, c.tracking_iid ? fmt::format("{:016x}", c.tracking_iid->bits) : "");
    for (std::size_t m = 0; m < c.members.size(); ++m) {
      if (m) out += ';';
      out += token_hex(c.members[m]);
    }
    out += '\n';
  }
  return out;
}

std::map<std::string, std::string> render_report(const AnalysisReport& r) {
  std::map<std::string, std::string> files;

  {
    std::string out = "scope,level,eui64_only,both,non_eui64_only\n";
    for (const auto& v : r.venn) {
      fmt::format_to(std::back_inserter(out), "{},{},{},{},{}\n", v.scope, v.level, v.counts.eui64_only, v.counts.both,
                     v.counts.non_eui64_only);
    }
    files["venn.csv"] = std::move(out);
  }
  {
    std::string out = "rank,oui,organization,distinct_iids,distinct_64s,distinct_56s\n";
    for (std::size_t i = 0; i < r.oui_popularity.size(); ++i) {
      const auto& row = r.oui_popularity[i];
      fmt::format_to(std::back_inserter(out), "{},{},{},{},{},{}\n", i + 1, format_oui(row.oui),
                     text::csv_field(row.organization), row.distinct_iids, row.distinct_64s, row.distinct_56s);
    }
    files["oui_popularity.csv"] = std::move(out);
  }
  files["category_shares.csv"] = share_csv(r.category_shares, "categories");
  files["iot_composition.csv"] = share_csv(r.iot_composition, "iot_category");
  {
    std::string out = "provider_id,prefixes,fraction,end_user_prefixes,dual_type_prefixes\n";
    for (const auto& row : r.collateral.rows) {
      fmt::format_to(std::back_inserter(out), "{},{},{:.6f},{},{}\n", text::csv_field(row.provider_id), row.prefixes,
                     row.fraction, r.collateral.end_user_prefixes, r.collateral.dual_type_prefixes);
    }
    files["collateral.csv"] = std::move(out);
  }
  {
    std::string out = "bucket_start,provider_id,cumulative_prefixes\n";
    for (const auto& p : r.collateral.series) {
      fmt::format_to(std::back_inserter(out), "{},{},{}\n", p.bucket_start, text::csv_field(p.provider_id),
                     p.cumulative_prefixes);
    }
    files["collateral_timeseries.csv"] = std::move(out);
  }
  {
    std::string out = "weight,observed,expected\n";
    const double n = static_cast<double>(r.hamming.sample_size);
    for (int k = 0; k < kHammingBins; ++k) {
      fmt::format_to(std::back_inserter(out), "{},{},{:.6f}\n", k, r.hamming.histogram[k], n * hamming_reference_pmf(k));
    }
    files["hamming.csv"] = std::move(out);
  }
  {
    std::string out = "oui,organization";
    for (auto port : r.ports.ports) fmt::format_to(std::back_inserter(out), ",{}", port);
    out += '\n';
    for (std::size_t i = 0; i < r.ports.ouis.size(); ++i) {
      out += format_oui(r.ports.ouis[i]);
      out += ',';
      out += text::csv_field(r.ports.organizations[i]);
      for (auto c : r.ports.counts[i]) fmt::format_to(std::back_inserter(out), ",{}", c);
      out += '\n';
    }
    files["ports.csv"] = std::move(out);
  }
  {
    std::string out = "product_id,bucket_start,eui64_addresses,eui64_iids,other_addresses,other_iids\n";
    for (const auto& s : r.timeseries) {
      for (const auto& p : s.points) {
        fmt::format_to(std::back_inserter(out), "{},{},{},{},{},{}\n", text::csv_field(s.product_id), p.bucket_start,
                       p.eui64_addresses, p.eui64_iids, p.other_addresses, p.other_iids);
      }
    }
    files["timeseries.csv"] = std::move(out);
  }
  files["tracking.csv"] = render_tracking_csv(r.tracking);
  {
    std::string out = "prefix_token\n";
    for (auto t : r.periphery) append(out, token_hex(t) + "\n");
    files["periphery.csv"] = std::move(out);
  }
  {
    std::string out = "metric,value\n";
    for (const auto& [k, v] : r.summary) fmt::format_to(std::back_inserter(out), "{},{}\n", k, v);
    files["summary.csv"] = std::move(out);
  }
  return files;
}

nlohmann::ordered_json RunManifest::to_json(const std::map<std::string, std::string>& output_digests) const {
  nlohmann::ordered_json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["subcommand"] = subcommand;
  auto& cfg = j["config"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config) cfg[k] = v;
  j["prf"] = kPrfName;
  j["digest"] = kDigestName;
  j["key_fingerprint"] = key_fingerprint;
  auto& in = j["inputs"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : inputs) in[k] = v;
  auto& out = j["outputs"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : output_digests) out[k] = v;
  return j;
}

void write_run_directory(const std::filesystem::path& dir, const std::map<std::string, std::string>& files,
                         const RunManifest& manifest) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  std::map<std::string, std::string> digests;
  for (const auto& [name, content] : files) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) throw IoError(fmt::format("cannot write '{}'", (dir / name).string()));
    digests[name] = digest_bytes(content);
  }
  std::ofstream m(dir / kManifestName, std::ios::binary | std::ios::trunc);
  m << manifest.to_json(digests).dump(2) << '\n';
  m.close();
  if (!m) throw IoError(fmt::format("cannot write '{}'", (dir / kManifestName).string()));
}

std::vector<std::string> check_run_directory(const std::filesystem::path& dir) {
  std::ifstream in(dir / kManifestName);
  if (!in) throw IoError(fmt::format("no {} in '{}'", kManifestName, dir.string()));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("unreadable manifest: {}", e.what()));
  }
  std::vector<std::string> problems;
  if (!j.contains("outputs") || !j["outputs"].is_object()) {
    problems.push_back("manifest has no outputs section");
    return problems;
  }
  for (const auto& [name, expected] : j["outputs"].items()) {
    auto path = dir / name;
    if (!std::filesystem::exists(path)) {
      problems.push_back(fmt::format("{}: missing", name));
      continue;
    }
    auto actual = digest_file(path);
    if (actual != expected.get<std::string>()) {
      problems.push_back(fmt::format("{}: digest mismatch (manifest {}, file {})", name, expected.get<std::string>(), actual));
    }
  }
  return problems;
}

}  // namespace eui64leak

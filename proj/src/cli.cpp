#include "eui64leak/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "eui64leak/digest.hpp"
#include "eui64leak/errors.hpp"
#include "eui64leak/pipeline.hpp"
#include "eui64leak/report.hpp"
#include "eui64leak/simgen.hpp"
#include "eui64leak/text.hpp"
#include "eui64leak/verify.hpp"

namespace eui64leak {

namespace {

namespace fs = std::filesystem;

// Exit 3 with a message.
struct VerificationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exit 1 for problems CLI11 cannot see (e.g. a missing key).
struct UsageFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

std::optional<AnonymizationKey> load_key(const std::string& key_file) {
  std::string hex;
  if (!key_file.empty()) {
    std::ifstream in(key_file);
    if (!in) throw IoError(fmt::format("cannot read key file '{}'", key_file));
    std::getline(in, hex);
  } else if (const char* env = std::getenv(kKeyEnvVar)) {
    hex = env;
  } else {
    return std::nullopt;
  }
  try {
    return AnonymizationKey::from_hex(text::trim(hex));
  } catch (const InvalidInput&) {
    // The message must not echo key material.
    throw InvalidInput(key_file.empty() ? fmt::format("{} is not 32 hex digits", kKeyEnvVar)
                                        : fmt::format("key file '{}' does not hold 32 hex digits", key_file));
  }
}

void write_text(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  out.close();
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError(fmt::format("cannot create output directory '{}'", dir.string()));
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
  std::string flows, oui_db, taxonomy, providers, signatures, out;
  std::string anonymize = "src";
  std::string key_file;
  unsigned threads = default_threads();
  std::vector<std::string> product_ouis;
  AnalysisOptions options;

  // Config entries recorded in the manifest (and read back by `report`).
  std::vector<std::pair<std::string, std::string>> resolved() const {
    std::string pouis;
    for (const auto& o : product_ouis) pouis += (pouis.empty() ? "" : ",") + o;
    return {
        {"input.flows", flows},
        {"input.oui_db", oui_db},
        {"input.taxonomy", taxonomy},
        {"input.providers", providers},
        {"input.signatures", signatures},
        {"anonymize", anonymize},
        {"periphery.min_eui64_iids", std::to_string(options.periphery.min_eui64_iids)},
        {"periphery.min_cpe_fraction", fmt::format("{}", options.periphery.min_cpe_fraction)},
        {"top_ouis", std::to_string(options.top_ouis)},
        {"heatmap_ouis", std::to_string(options.heatmap_ouis)},
        {"heatmap_ports", std::to_string(options.heatmap_ports)},
        {"bucket_seconds", std::to_string(options.bucket_seconds)},
        {"hamming_min_sample", std::to_string(options.hamming_min_sample)},
        {"min_hits", std::to_string(options.min_hits)},
        {"product_ouis", pouis},
    };
  }
};

void add_analysis_flags(CLI::App* cmd, AnalysisOptions& o) {
  cmd->add_option("--min-eui64-iids", o.periphery.min_eui64_iids, "Periphery density threshold")->capture_default_str();
  cmd->add_option("--min-cpe-fraction", o.periphery.min_cpe_fraction, "Periphery CPE purity threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--top-ouis", o.top_ouis, "Rows in the OUI popularity table (0 = all)")->capture_default_str();
  cmd->add_option("--heatmap-ouis", o.heatmap_ouis, "OUIs in the port heatmap")->capture_default_str();
  cmd->add_option("--heatmap-ports", o.heatmap_ports, "Ports in the port heatmap")->capture_default_str();
  cmd->add_option("--bucket-seconds", o.bucket_seconds, "Time series bucket width")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--hamming-min-sample", o.hamming_min_sample, "Minimum privacy IIDs for the Hamming test")
      ->capture_default_str();
  cmd->add_option("--min-hits", o.min_hits, "Signature elements a source must hit to match a product")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

struct AnalyzeResult {
  AnalysisReport report;
  IngestStats stats;
  RunManifest manifest;
};

AnalyzeResult analyze(const AnalyzeArgs& a, std::ostream& err) {
  auto side = parse_anonymize_side(a.anonymize);
  if (!side) throw UsageFailure(fmt::format("--anonymize must be none, src, dst or both (got '{}')", a.anonymize));

  AnalyzeResult r;
  r.manifest.subcommand = "analyze";
  r.manifest.config = a.resolved();

  AnalysisContext ctx;
  ctx.anonymize_side = *side;
  if (*side != AnonymizeSide::None) {
    ctx.key = load_key(a.key_file);
    if (!ctx.key) {
      throw UsageFailure(fmt::format("anonymization '{}' needs a key: set {} or pass --key-file", a.anonymize, kKeyEnvVar));
    }
    r.manifest.key_fingerprint = ctx.key->fingerprint();
  }

  auto db = OuiDatabase::load_file(a.oui_db);
  r.manifest.inputs.emplace_back(fs::path(a.oui_db).filename().string(), digest_file(a.oui_db));
  if (db.stats().skipped) err << fmt::format("warning: {}: {} malformed lines skipped\n", a.oui_db, db.stats().skipped);

  Taxonomy taxonomy;
  if (a.taxonomy.empty()) {
    err << "warning: no taxonomy given; every manufacturer is categorized Unknown\n";
  } else {
    taxonomy = Taxonomy::load_file(a.taxonomy);
    r.manifest.inputs.emplace_back(fs::path(a.taxonomy).filename().string(), digest_file(a.taxonomy));
    if (taxonomy.stats().skipped) {
      err << fmt::format("warning: {}: {} malformed lines skipped\n", a.taxonomy, taxonomy.stats().skipped);
    }
    if (auto missing = taxonomy.unregistered(db); !missing.empty()) {
      err << fmt::format("warning: {} taxonomy OUIs are not in the registry\n", missing.size());
    }
  }

  auto providers = ProviderMap::load_file(a.providers);
  r.manifest.inputs.emplace_back(fs::path(a.providers).filename().string(), digest_file(a.providers));
  if (providers.stats().skipped) {
    err << fmt::format("warning: {}: {} malformed lines skipped\n", a.providers, providers.stats().skipped);
  }
  ctx.providers = &providers;

  if (!a.signatures.empty()) {
    std::ifstream in(a.signatures);
    if (!in) throw IoError(fmt::format("cannot read '{}'", a.signatures));
    ctx.products = load_signatures(in, providers);
    r.manifest.inputs.emplace_back(fs::path(a.signatures).filename().string(), digest_file(a.signatures));
  }
  for (const auto& o : a.product_ouis) ctx.product_ouis.push_back(parse_oui(o));

  std::ifstream flows(a.flows, std::ios::binary);
  if (!flows) throw IoError(fmt::format("cannot read '{}'", a.flows));
  IngestPipeline pipeline(ctx, a.threads);
  pipeline.ingest_stream(flows);
  auto acc = pipeline.finish();
  r.stats = pipeline.stats();
  r.manifest.inputs.emplace_back(fs::path(a.flows).filename().string(), digest_file(a.flows));

  if (r.stats.malformed) {
    err << fmt::format("warning: {}: {} malformed flow lines skipped\n", a.flows, r.stats.malformed);
    for (const auto& [line, msg] : r.stats.errors) err << "  " << msg << '\n';
  }
  if (r.stats.records == 0) {
    throw InvalidInput(fmt::format("no IPv6 flows in '{}' ({} lines, {} non-IPv6, {} malformed)", a.flows,
                                   r.stats.lines, r.stats.skipped_non_ipv6, r.stats.malformed));
  }
  r.report = build_report(acc, db, taxonomy, providers, a.options, r.stats);
  return r;
}

void print_summary(const AnalysisReport& report, std::ostream& out) {
  for (const auto& [k, v] : report.summary) out << fmt::format("{:<28} {}\n", k, v);
}

// ---------------------------------------------------------------------------
// report: re-run an analysis from a prior run's manifest.

AnalyzeArgs args_from_manifest(const fs::path& dir) {
  std::ifstream in(dir / kManifestName);
  if (!in) throw IoError(fmt::format("no {} in '{}'", kManifestName, dir.string()));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("unreadable manifest: {}", e.what()));
  }
  if (j.value("subcommand", "") != "analyze") {
    throw InvalidInput(fmt::format("'{}' is not an analyze run", dir.string()));
  }
  const auto& c = j.at("config");
  auto get = [&](const char* k) { return c.contains(k) ? c[k].get<std::string>() : std::string{}; };
  auto num = [&](const char* k, auto& out) {
    using T = std::decay_t<decltype(out)>;
    if (auto v = text::parse_number<T>(get(k))) out = *v;
  };
  AnalyzeArgs a;
  a.flows = get("input.flows");
  a.oui_db = get("input.oui_db");
  a.taxonomy = get("input.taxonomy");
  a.providers = get("input.providers");
  a.signatures = get("input.signatures");
  a.anonymize = get("anonymize");
  num("periphery.min_eui64_iids", a.options.periphery.min_eui64_iids);
  num("periphery.min_cpe_fraction", a.options.periphery.min_cpe_fraction);
  num("top_ouis", a.options.top_ouis);
  num("heatmap_ouis", a.options.heatmap_ouis);
  num("heatmap_ports", a.options.heatmap_ports);
  num("bucket_seconds", a.options.bucket_seconds);
  num("hamming_min_sample", a.options.hamming_min_sample);
  num("min_hits", a.options.min_hits);
  const std::string pouis = get("product_ouis");
  std::string_view rest = pouis;
  while (!rest.empty()) {
    auto comma = rest.find(',');
    a.product_ouis.emplace_back(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  return a;
}

// ---------------------------------------------------------------------------
// simulate

SimConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  auto cfg = SimConfig::load_file(path);
  if (seed) cfg.seed = *seed;
  return cfg;
}

void simulate(const SimConfig& cfg, const fs::path& out_dir, const std::string& config_path, std::ostream& log) {
  Simulator sim(cfg);
  ensure_dir(out_dir);

  std::map<std::string, std::string> files = {
      {"households.csv", sim.households_csv()}, {"assignments.csv", sim.assignments_csv()},
      {"providers.csv", sim.providers_csv()},   {"oui_registry.csv", sim.oui_registry_csv()},
      {"taxonomy.csv", sim.taxonomy_csv()},
  };
  if (!cfg.products.empty()) files["signatures.csv"] = sim.signatures_csv();

  std::map<std::string, std::string> digests;
  for (const auto& [name, content] : files) {
    write_text(out_dir / name, content);
    digests[name] = digest_bytes(content);
  }

  const fs::path flows_path = out_dir / "flows.csv";
  std::ofstream flows(flows_path, std::ios::binary | std::ios::trunc);
  if (!flows) throw IoError(fmt::format("cannot write '{}'", flows_path.string()));
  std::string buf;
  buf.append(kFlowHeader).push_back('\n');
  std::uint64_t count = 0;
  for (std::uint64_t s = 0; s < cfg.slots(); ++s) {
    for (const auto& f : sim.slot_flows(s)) {
      append_flow(buf, f.flow);
      ++count;
    }
    flows << buf;
    buf.clear();
  }
  flows.close();
  if (!flows) throw IoError(fmt::format("cannot write '{}'", flows_path.string()));
  digests["flows.csv"] = digest_file(flows_path);

  RunManifest manifest;
  manifest.subcommand = "simulate";
  manifest.config = cfg.resolved();
  manifest.inputs.emplace_back(fs::path(config_path).filename().string(), digest_file(config_path));
  write_text(out_dir / kManifestName, manifest.to_json(digests).dump(2) + "\n");

  log << fmt::format("simulated {} households, {} epochs, {} flows -> {}\n", cfg.households, cfg.epochs(), count,
                     out_dir.string());
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"EUI-64 IPv6 privacy-leakage analysis and synthetic ISP simulation", "eui64leak"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  // simulate
  std::string sim_config, sim_out;
  std::optional<std::uint64_t> sim_seed;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate flows, ground truth and analyzer inputs");
  sim_cmd->add_option("--config,-c", sim_config, "Simulation config file")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--seed", sim_seed, "Override the config seed");
  sim_cmd->add_option("--out,-o", sim_out, "Output directory")->required();

  // analyze
  AnalyzeArgs an;
  auto* an_cmd = app.add_subcommand("analyze", "Analyze a flow CSV and write report tables");
  an_cmd->add_option("--flows", an.flows, "Flow CSV")->required()->check(CLI::ExistingFile);
  an_cmd->add_option("--oui-db", an.oui_db, "OUI registry CSV (oui,organization,address)")
      ->required()
      ->check(CLI::ExistingFile);
  an_cmd->add_option("--taxonomy", an.taxonomy, "Manufacturer taxonomy CSV (oui,categories,iot_category)")
      ->check(CLI::ExistingFile);
  an_cmd->add_option("--providers", an.providers, "Provider map CSV (prefix,provider_id)")
      ->required()
      ->check(CLI::ExistingFile);
  an_cmd->add_option("--signatures", an.signatures, "Product signatures CSV (product_id,target,port)")
      ->check(CLI::ExistingFile);
  an_cmd->add_option("--out,-o", an.out, "Report directory")->required();
  an_cmd->add_option("--anonymize", an.anonymize, "Anonymize prefixes of: none, src, dst, both")->capture_default_str();
  an_cmd->add_option("--key-file", an.key_file,
                     fmt::format("File holding the 32-hex-digit anonymization key (default: ${})", kKeyEnvVar));
  an_cmd->add_option("--threads,-j", an.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  an_cmd->add_option("--product-ouis", an.product_ouis, "Restrict EUI-64 product sources to these OUIs")
      ->delimiter(',');
  add_analysis_flags(an_cmd, an.options);

  // report
  std::string rep_run, rep_out;
  unsigned rep_threads = default_threads();
  std::string rep_key_file;
  auto* rep_cmd = app.add_subcommand("report", "Check a prior analyze run and re-render its tables");
  rep_cmd->add_option("--run", rep_run, "Directory of a prior analyze run")->required()->check(CLI::ExistingDirectory);
  rep_cmd->add_option("--out,-o", rep_out, "Write re-rendered tables here (default: only compare)");
  rep_cmd->add_option("--key-file", rep_key_file, "Key file, when the run was anonymized");
  rep_cmd->add_option("--threads,-j", rep_threads, "Worker threads")->check(CLI::PositiveNumber);

  // verify
  std::string ver_config, ver_out, ver_check;
  std::optional<std::uint64_t> ver_seed;
  VerifyOptions vo;
  vo.threads = default_threads();
  auto* ver_cmd = app.add_subcommand("verify", "Simulate, analyze, and check the analysis against ground truth");
  ver_cmd->add_option("--config,-c", ver_config, "Simulation config file")->check(CLI::ExistingFile);
  ver_cmd->add_option("--seed", ver_seed, "Override the config seed");
  ver_cmd->add_option("--threads,-j", vo.threads, "Worker threads")->check(CLI::PositiveNumber);
  ver_cmd->add_option("--out,-o", ver_out, "Also write the analysis report here");
  ver_cmd->add_option("--check-report", ver_check, "Check digests of an existing run directory")
      ->check(CLI::ExistingDirectory);
  add_analysis_flags(ver_cmd, vo.analysis);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sim_cmd) {
      simulate(load_config(sim_config, sim_seed), sim_out, sim_config, err);
      return kExitOk;
    }
    if (*an_cmd) {
      auto r = analyze(an, err);
      write_run_directory(an.out, render_report(r.report), r.manifest);
      print_summary(r.report, out);
      return kExitOk;
    }
    if (*rep_cmd) {
      auto problems = check_run_directory(rep_run);
      for (const auto& p : problems) err << "digest check: " << p << '\n';
      AnalyzeArgs a = args_from_manifest(rep_run);
      a.key_file = rep_key_file;
      a.threads = rep_threads;
      auto r = analyze(a, err);
      auto files = render_report(r.report);
      std::size_t differing = 0;
      for (const auto& [name, content] : files) {
        std::ifstream in(fs::path(rep_run) / name, std::ios::binary);
        std::string prior((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (prior != content) {
          err << fmt::format("re-rendered {} differs from the stored table\n", name);
          ++differing;
        }
      }
      if (!rep_out.empty()) write_run_directory(rep_out, files, r.manifest);
      print_summary(r.report, out);
      if (!problems.empty() || differing) {
        throw VerificationFailure(fmt::format("{} digest problems, {} differing tables", problems.size(), differing));
      }
      return kExitOk;
    }
    if (*ver_cmd) {
      if (ver_config.empty() && ver_check.empty()) throw UsageFailure("verify needs --config and/or --check-report");
      bool ok = true;
      if (!ver_check.empty()) {
        auto problems = check_run_directory(ver_check);
        for (const auto& p : problems) out << "FAIL report_digests: " << p << '\n';
        if (problems.empty()) out << "PASS report_digests: all outputs match " << kManifestName << '\n';
        ok = problems.empty();
      }
      if (!ver_config.empty()) {
        auto cfg = load_config(ver_config, ver_seed);
        Simulator sim(cfg);
        if (auto key = load_key("")) vo.key = key;
        auto outcome = run_verify(sim, vo);
        for (const auto& c : outcome.checks) {
          out << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
        }
        ok = ok && outcome.passed();
        if (!ver_out.empty()) {
          RunManifest m;
          m.subcommand = "verify";
          m.config = cfg.resolved();
          m.inputs.emplace_back(fs::path(ver_config).filename().string(), digest_file(ver_config));
          m.key_fingerprint = vo.key ? vo.key->fingerprint() : default_verify_key(cfg.seed).fingerprint();
          write_run_directory(ver_out, render_report(outcome.analysis.report), m);
        }
      }
      out << (ok ? "verify: all checks passed\n" : "verify: FAILED\n");
      return ok ? kExitOk : kExitVerification;
    }
  } catch (const UsageFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const VerificationFailure& e) {
    err << "verification failed: " << e.what() << '\n';
    return kExitVerification;
  } catch (const ConfigError& e) {
    err << "error: invalid configuration\n";
    for (const auto& v : e.violations()) err << "  " << v << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitUsage;
}

}  // namespace eui64leak

#include "eui64leak/simgen.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_set>

#include <fmt/format.h>

#include "eui64leak/config.hpp"
#include "eui64leak/errors.hpp"
#include "eui64leak/text.hpp"

namespace eui64leak {

namespace {

// Stream tags for derive_seed.
enum : std::uint64_t { kTagHousehold = 1, kTagPrivacy = 2, kTagContacts = 3, kTagMac = 4 };

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    auto comma = s.find(',');
    auto item = text::trim(s.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    s = s.substr(comma + 1);
  }
  return out;
}

std::optional<bool> parse_bool(std::string_view s) {
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  return std::nullopt;
}

std::string fmt_double(double v) { return fmt::format("{}", v); }

// Collects violations while reading one entry at a time.
struct Reader {
  std::vector<std::string>& errors;

  template <typename T>
  void number(const KeyValueFile::Entry& e, const std::string& path, T& out) {
    if (auto v = text::parse_number<T>(e.value)) {
      out = *v;
    } else {
      errors.push_back(fmt::format("{}: '{}' is not a valid number (line {})", path, e.value, e.line));
    }
  }

  void boolean(const KeyValueFile::Entry& e, const std::string& path, bool& out) {
    if (auto v = parse_bool(e.value)) {
      out = *v;
    } else {
      errors.push_back(fmt::format("{}: '{}' is not a boolean (line {})", path, e.value, e.line));
    }
  }

  void prefix(const KeyValueFile::Entry& e, const std::string& path, Prefix& out) {
    try {
      out = parse_prefix(e.value);
    } catch (const ParseError& err) {
      errors.push_back(fmt::format("{}: {} (line {})", path, err.what(), e.line));
    }
  }
};

void check_probability(std::vector<std::string>& errors, const std::string& path, double p) {
  if (!(p >= 0.0 && p <= 1.0)) errors.push_back(fmt::format("{}: probability {} outside [0, 1]", path, p));
}

std::uint64_t prefix_capacity(const Prefix& p) {
  return p.length >= 56 ? 1 : (p.length <= 0 ? UINT64_MAX : std::uint64_t{1} << (56 - p.length));
}

}  // namespace

std::string_view to_string(DeviceKind k) noexcept {
  switch (k) {
    case DeviceKind::Eui64: return "eui64";
    case DeviceKind::Privacy: return "privacy";
    case DeviceKind::Cpe: return "cpe";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Config

SimConfig SimConfig::parse(std::istream& in) {
  const auto file = KeyValueFile::parse(in);
  SimConfig c;
  std::vector<std::string> errors;
  Reader rd{errors};

  std::map<std::string, ManufacturerSpec> manufacturers;
  std::map<std::string, ProviderSpec> providers;
  std::map<std::string, ProductSpec> products;
  std::vector<std::string> manufacturer_order, provider_order, product_order;
  std::set<std::string> seen_keys;

  for (const auto& e : file.entries()) {
    const std::string path = e.section.empty() ? e.key : e.section + "." + e.key;
    if (!seen_keys.insert(path).second) {
      errors.push_back(fmt::format("{}: duplicate key (line {})", path, e.line));
      continue;
    }
    if (e.section == "simulation") {
      const auto& k = e.key;
      if (k == "seed") rd.number(e, path, c.seed);
      else if (k == "households") rd.number(e, path, c.households);
      else if (k == "start_time") rd.number(e, path, c.start_time);
      else if (k == "duration") rd.number(e, path, c.duration);
      else if (k == "rotation_period") rd.number(e, path, c.rotation_period);
      else if (k == "contact_interval") rd.number(e, path, c.contact_interval);
      else if (k == "p_eui64_household") rd.number(e, path, c.p_eui64_household);
      else if (k == "p_dual_given_eui64") rd.number(e, path, c.p_dual_given_eui64);
      else if (k == "eui64_devices_min") rd.number(e, path, c.eui64_devices_min);
      else if (k == "eui64_devices_max") rd.number(e, path, c.eui64_devices_max);
      else if (k == "privacy_devices_min") rd.number(e, path, c.privacy_devices_min);
      else if (k == "privacy_devices_max") rd.number(e, path, c.privacy_devices_max);
      else if (k == "flows_per_contact") rd.number(e, path, c.flows_per_contact);
      else if (k == "privacy_regen_interval") rd.number(e, path, c.privacy_regen_interval);
      else if (k == "exclude_fffe_collisions") rd.boolean(e, path, c.exclude_fffe_collisions);
      else if (k == "inject_duplicate_macs") rd.boolean(e, path, c.inject_duplicate_macs);
      else if (k == "duplicate_mac_pairs") rd.number(e, path, c.duplicate_mac_pairs);
      else if (k == "sampling_rate") rd.number(e, path, c.sampling_rate);
      else if (k == "periphery_pool_size") rd.number(e, path, c.periphery_pool_size);
      else if (k == "end_user_base") rd.prefix(e, path, c.end_user_base);
      else if (k == "periphery_base") rd.prefix(e, path, c.periphery_base);
      else errors.push_back(fmt::format("{}: unknown key (line {})", path, e.line));
    } else if (e.section.rfind("manufacturer.", 0) == 0) {
      const std::string name = e.section.substr(13);
      auto [it, fresh] = manufacturers.try_emplace(name);
      if (fresh) {
        it->second.name = name;
        manufacturer_order.push_back(name);
      }
      auto& m = it->second;
      if (e.key == "oui") {
        try {
          m.oui = parse_oui(e.value);
        } catch (const ParseError& err) {
          errors.push_back(fmt::format("{}: {} (line {})", path, err.what(), e.line));
        }
      } else if (e.key == "organization") {
        m.organization = e.value;
      } else if (e.key == "weight") {
        rd.number(e, path, m.weight);
      } else if (e.key == "categories") {
        if (auto cats = CategorySet::parse(e.value)) m.categories = *cats;
        else errors.push_back(fmt::format("{}: unknown category in '{}' (line {})", path, e.value, e.line));
      } else if (e.key == "iot") {
        if (auto iot = parse_iot_category(e.value)) m.iot = iot;
        else errors.push_back(fmt::format("{}: unknown IoT category '{}' (line {})", path, e.value, e.line));
      } else {
        errors.push_back(fmt::format("{}: unknown key (line {})", path, e.line));
      }
    } else if (e.section.rfind("provider.", 0) == 0) {
      const std::string name = e.section.substr(9);
      auto [it, fresh] = providers.try_emplace(name);
      if (fresh) {
        it->second.name = name;
        provider_order.push_back(name);
      }
      auto& p = it->second;
      if (e.key == "prefix") {
        rd.prefix(e, path, p.prefix);
      } else if (e.key == "ports") {
        for (auto item : split_list(e.value)) {
          auto port = text::parse_number<unsigned>(item);
          if (!port || *port > 65535) {
            errors.push_back(fmt::format("{}: invalid port '{}' (line {})", path, item, e.line));
          } else {
            p.ports.push_back(static_cast<std::uint16_t>(*port));
          }
        }
      } else if (e.key == "protocol") {
        unsigned proto = 0;
        rd.number(e, path, proto);
        if (proto > 255) errors.push_back(fmt::format("{}: protocol {} out of range", path, proto));
        p.protocol = static_cast<std::uint8_t>(proto);
      } else if (e.key == "p_eui64") {
        rd.number(e, path, p.p_eui64);
      } else if (e.key == "p_privacy") {
        rd.number(e, path, p.p_privacy);
      } else if (e.key == "p_cpe") {
        rd.number(e, path, p.p_cpe);
      } else if (e.key == "manufacturers") {
        for (auto item : split_list(e.value)) p.manufacturers.emplace_back(item);
      } else {
        errors.push_back(fmt::format("{}: unknown key (line {})", path, e.line));
      }
    } else if (e.section.rfind("product.", 0) == 0) {
      const std::string name = e.section.substr(8);
      auto [it, fresh] = products.try_emplace(name);
      if (fresh) {
        it->second.name = name;
        product_order.push_back(name);
      }
      if (e.key == "targets") {
        for (auto item : split_list(e.value)) {
          auto at = item.find('@');
          std::optional<std::uint16_t> port;
          if (at != std::string_view::npos) {
            auto v = text::parse_number<unsigned>(item.substr(at + 1));
            if (!v || *v > 65535) {
              errors.push_back(fmt::format("{}: invalid port in '{}' (line {})", path, item, e.line));
              continue;
            }
            port = static_cast<std::uint16_t>(*v);
          }
          it->second.targets.emplace_back(std::string(item.substr(0, at)), port);
        }
      } else {
        errors.push_back(fmt::format("{}: unknown key (line {})", path, e.line));
      }
    } else {
      errors.push_back(fmt::format("{}: unknown section '{}' (line {})", path, e.section, e.line));
    }
  }

  for (const auto& n : manufacturer_order) c.manufacturers.push_back(std::move(manufacturers[n]));
  for (const auto& n : provider_order) c.providers.push_back(std::move(providers[n]));
  for (const auto& n : product_order) c.products.push_back(std::move(products[n]));

  auto more = c.validate();
  errors.insert(errors.end(), more.begin(), more.end());
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return c;
}

SimConfig SimConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read config '{}'", path.string()));
  return parse(in);
}

std::vector<std::string> SimConfig::validate() const {
  std::vector<std::string> errors;
  auto err = [&](std::string s) { errors.push_back(std::move(s)); };

  if (households == 0) err("simulation.households: must be at least 1");
  if (duration <= 0) err("simulation.duration: must be positive");
  if (rotation_period <= 0) err("simulation.rotation_period: must be positive");
  if (contact_interval <= 0) err("simulation.contact_interval: must be positive");
  if (contact_interval > 0 && duration > 0 && duration % contact_interval != 0) {
    err("simulation.duration: must be a multiple of contact_interval");
  }
  if (contact_interval > 0 && rotation_period > 0 && rotation_period % contact_interval != 0) {
    err("simulation.rotation_period: must be a multiple of contact_interval");
  }
  if (privacy_regen_interval < 0) err("simulation.privacy_regen_interval: must be >= 0");
  check_probability(errors, "simulation.p_eui64_household", p_eui64_household);
  check_probability(errors, "simulation.p_dual_given_eui64", p_dual_given_eui64);
  if (eui64_devices_min < 1) err("simulation.eui64_devices_min: must be at least 1");
  if (eui64_devices_min > eui64_devices_max) err("simulation.eui64_devices_max: must be >= eui64_devices_min");
  if (privacy_devices_min < 1) err("simulation.privacy_devices_min: must be at least 1");
  if (privacy_devices_min > privacy_devices_max) err("simulation.privacy_devices_max: must be >= privacy_devices_min");
  if (!(flows_per_contact >= 1.0 && flows_per_contact <= 100.0)) err("simulation.flows_per_contact: must be in [1, 100]");
  if (sampling_rate < 1) err("simulation.sampling_rate: must be at least 1");
  if (inject_duplicate_macs && duplicate_mac_pairs < 1) err("simulation.duplicate_mac_pairs: must be at least 1");

  if (end_user_base.length > 56) err("simulation.end_user_base: prefix must be /56 or shorter");
  if (periphery_base.length > 56) err("simulation.periphery_base: prefix must be /56 or shorter");
  if (end_user_base.length <= 56 && rotation_period > 0 && duration > 0) {
    const auto needed = static_cast<unsigned __int128>(households) * epochs();
    if (needed > prefix_capacity(end_user_base)) {
      err(fmt::format("simulation.end_user_base: {} holds {} /56s, need {}", format_prefix(end_user_base),
                      prefix_capacity(end_user_base), static_cast<std::uint64_t>(needed)));
    }
  }
  if (periphery_base.length <= 56 && periphery_pool_size > prefix_capacity(periphery_base)) {
    err("simulation.periphery_pool_size: larger than periphery_base holds");
  }
  if (periphery_pool_size > 0 && end_user_base.length <= 56 && periphery_base.length <= 56) {
    const int shorter = std::min(end_user_base.length, periphery_base.length);
    if (contains(make_prefix(end_user_base.bits, shorter), periphery_base.bits)) {
      err("simulation.periphery_base: overlaps end_user_base");
    }
  }

  bool any_home = false;
  bool any_cpe = false;
  std::set<std::string> names;
  std::set<std::uint32_t> ouis;
  for (const auto& m : manufacturers) {
    const std::string base = "manufacturer." + m.name;
    names.insert(m.name);
    if (m.organization.empty()) err(base + ".organization: required");
    if (m.categories.empty()) err(base + ".categories: required");
    if (!(m.weight > 0.0)) err(base + ".weight: must be positive");
    if ((m.oui.value >> 16) & 0x03) err(base + ".oui: must be a universal unicast OUI (low two bits of octet 0 clear)");
    if (!ouis.insert(m.oui.value).second) err(base + ".oui: duplicates another manufacturer's OUI");
    if (m.iot && !m.categories.only(DeviceCategory::IoT)) err(base + ".iot: only allowed when categories = IoT");
    (m.is_cpe() ? any_cpe : any_home) = true;
  }
  if (p_eui64_household > 0.0 && !any_home) err("manufacturer: no non-CPE manufacturer for EUI-64 devices");
  if (periphery_pool_size > 0 && !any_cpe) err("manufacturer: periphery_pool_size > 0 needs a CPE manufacturer");

  std::set<std::string> provider_names;
  for (const auto& p : providers) {
    const std::string base = "provider." + p.name;
    provider_names.insert(p.name);
    if (p.prefix.length == 0) err(base + ".prefix: required");
    if (p.ports.empty()) err(base + ".ports: at least one port required");
    check_probability(errors, base + ".p_eui64", p.p_eui64);
    check_probability(errors, base + ".p_privacy", p.p_privacy);
    check_probability(errors, base + ".p_cpe", p.p_cpe);
    for (const auto& m : p.manufacturers) {
      if (!names.count(m)) err(fmt::format("{}.manufacturers: unknown manufacturer '{}'", base, m));
    }
    if (p.prefix.length > 0) {
      for (const auto* base_prefix : {&end_user_base, &periphery_base}) {
        const int shorter = std::min(p.prefix.length, base_prefix->length);
        if (contains(make_prefix(p.prefix.bits, shorter), base_prefix->bits)) {
          err(base + ".prefix: overlaps a subscriber address pool");
        }
      }
    }
  }
  if (providers.empty()) err("provider: at least one provider section required");

  for (const auto& pr : products) {
    const std::string base = "product." + pr.name;
    if (pr.targets.empty()) err(base + ".targets: required");
    for (const auto& [name, port] : pr.targets) {
      if (!provider_names.count(name)) err(fmt::format("{}.targets: unknown provider '{}'", base, name));
    }
  }
  return errors;
}

std::vector<std::pair<std::string, std::string>> SimConfig::resolved() const {
  std::vector<std::pair<std::string, std::string>> out = {
      {"simulation.seed", std::to_string(seed)},
      {"simulation.households", std::to_string(households)},
      {"simulation.start_time", std::to_string(start_time)},
      {"simulation.duration", std::to_string(duration)},
      {"simulation.rotation_period", std::to_string(rotation_period)},
      {"simulation.contact_interval", std::to_string(contact_interval)},
      {"simulation.p_eui64_household", fmt_double(p_eui64_household)},
      {"simulation.p_dual_given_eui64", fmt_double(p_dual_given_eui64)},
      {"simulation.eui64_devices_min", std::to_string(eui64_devices_min)},
      {"simulation.eui64_devices_max", std::to_string(eui64_devices_max)},
      {"simulation.privacy_devices_min", std::to_string(privacy_devices_min)},
      {"simulation.privacy_devices_max", std::to_string(privacy_devices_max)},
      {"simulation.flows_per_contact", fmt_double(flows_per_contact)},
      {"simulation.privacy_regen_interval", std::to_string(privacy_regen_interval)},
      {"simulation.exclude_fffe_collisions", exclude_fffe_collisions ? "true" : "false"},
      {"simulation.inject_duplicate_macs", inject_duplicate_macs ? "true" : "false"},
      {"simulation.duplicate_mac_pairs", std::to_string(duplicate_mac_pairs)},
      {"simulation.sampling_rate", std::to_string(sampling_rate)},
      {"simulation.periphery_pool_size", std::to_string(periphery_pool_size)},
      {"simulation.end_user_base", format_prefix(end_user_base)},
      {"simulation.periphery_base", format_prefix(periphery_base)},
  };
  for (const auto& m : manufacturers) {
    const std::string base = "manufacturer." + m.name + ".";
    out.emplace_back(base + "oui", format_oui(m.oui));
    out.emplace_back(base + "organization", m.organization);
    out.emplace_back(base + "weight", fmt_double(m.weight));
    out.emplace_back(base + "categories", m.categories.to_string());
    if (m.iot) out.emplace_back(base + "iot", std::string(to_string(*m.iot)));
  }
  for (const auto& p : providers) {
    const std::string base = "provider." + p.name + ".";
    std::string ports;
    for (auto port : p.ports) ports += (ports.empty() ? "" : ",") + std::to_string(port);
    out.emplace_back(base + "prefix", format_prefix(p.prefix));
    out.emplace_back(base + "ports", ports);
    out.emplace_back(base + "protocol", std::to_string(p.protocol));
    out.emplace_back(base + "p_eui64", fmt_double(p.p_eui64));
    out.emplace_back(base + "p_privacy", fmt_double(p.p_privacy));
    out.emplace_back(base + "p_cpe", fmt_double(p.p_cpe));
    if (!p.manufacturers.empty()) {
      std::string ms;
      for (const auto& m : p.manufacturers) ms += (ms.empty() ? "" : ",") + m;
      out.emplace_back(base + "manufacturers", ms);
    }
  }
  for (const auto& pr : products) {
    std::string targets;
    for (const auto& [name, port] : pr.targets) {
      if (!targets.empty()) targets += ',';
      targets += port ? fmt::format("{}@{}", name, *port) : name;
    }
    out.emplace_back("product." + pr.name + ".targets", targets);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Population

bool SimHousehold::has_eui64() const noexcept {
  return std::any_of(devices.begin(), devices.end(), [](const SimDevice& d) { return d.kind == DeviceKind::Eui64; });
}

bool SimHousehold::has_privacy() const noexcept {
  return std::any_of(devices.begin(), devices.end(), [](const SimDevice& d) { return d.kind == DeviceKind::Privacy; });
}

Iid64 random_privacy_iid(Rng& rng, bool exclude_fffe) {
  while (true) {
    Iid64 iid{rng.next() & ~(std::uint64_t{0x02} << 56)};
    if (!exclude_fffe || !is_eui64(iid)) return iid;
  }
}

Simulator::Simulator(SimConfig config) : config_(std::move(config)) {
  if (auto errors = config_.validate(); !errors.empty()) throw ConfigError(std::move(errors));
  for (const auto& p : config_.providers) {
    std::vector<std::size_t> allowed;
    for (const auto& name : p.manufacturers) {
      for (std::size_t i = 0; i < config_.manufacturers.size(); ++i) {
        if (config_.manufacturers[i].name == name) allowed.push_back(i);
      }
    }
    std::sort(allowed.begin(), allowed.end());
    provider_allowed_.push_back(std::move(allowed));
  }
  build_population();
}

void Simulator::build_population() {
  const auto& c = config_;
  std::vector<std::size_t> home_pool, cpe_pool;
  std::vector<double> home_cum, cpe_cum;
  for (std::size_t i = 0; i < c.manufacturers.size(); ++i) {
    auto& pool = c.manufacturers[i].is_cpe() ? cpe_pool : home_pool;
    auto& cum = c.manufacturers[i].is_cpe() ? cpe_cum : home_cum;
    pool.push_back(i);
    cum.push_back((cum.empty() ? 0.0 : cum.back()) + c.manufacturers[i].weight);
  }
  auto pick = [](Rng& rng, const std::vector<std::size_t>& pool, const std::vector<double>& cum) {
    const double x = rng.unit() * cum.back();
    auto it = std::upper_bound(cum.begin(), cum.end(), x);
    if (it == cum.end()) --it;
    return pool[static_cast<std::size_t>(it - cum.begin())];
  };

  std::unordered_set<std::uint64_t> macs;
  auto assign_mac = [&](Rng& rng, SimDevice& d) {
    const Oui oui = c.manufacturers[d.manufacturer].oui;
    while (true) {
      const std::uint64_t packed = (std::uint64_t{oui.value} << 24) | rng.below(1u << 24);
      if (!macs.insert(packed).second) continue;
      Mac48 mac;
      for (int i = 0; i < 6; ++i) mac.octets[i] = static_cast<std::uint8_t>(packed >> (8 * (5 - i)));
      d.mac = mac;
      return;
    }
  };

  households_.reserve(c.households);
  for (std::uint32_t h = 0; h < c.households; ++h) {
    Rng rng(derive_seed({c.seed, kTagHousehold, h}));
    SimHousehold hh;
    hh.id = h;
    hh.subnet = static_cast<std::uint8_t>(rng.below(256));
    const bool eui = rng.bernoulli(c.p_eui64_household);
    std::uint64_t n_eui = 0;
    std::uint64_t n_priv = 0;
    if (eui) {
      n_eui = rng.between(c.eui64_devices_min, c.eui64_devices_max);
      if (rng.bernoulli(c.p_dual_given_eui64)) n_priv = rng.between(c.privacy_devices_min, c.privacy_devices_max);
    } else {
      n_priv = rng.between(c.privacy_devices_min, c.privacy_devices_max);
    }
    std::uint32_t next_id = 0;
    Rng mac_rng(derive_seed({c.seed, kTagMac, h}));
    for (std::uint64_t i = 0; i < n_eui; ++i) {
      SimDevice d{next_id++, DeviceKind::Eui64, std::nullopt, pick(rng, home_pool, home_cum)};
      assign_mac(mac_rng, d);
      hh.devices.push_back(d);
    }
    for (std::uint64_t i = 0; i < n_priv; ++i) hh.devices.push_back(SimDevice{next_id++, DeviceKind::Privacy, std::nullopt, kNoManufacturer});
    if (c.periphery_pool_size > 0) {
      SimDevice d{next_id++, DeviceKind::Cpe, std::nullopt, pick(rng, cpe_pool, cpe_cum)};
      assign_mac(mac_rng, d);
      hh.devices.push_back(d);
    }
    households_.push_back(std::move(hh));
  }

  if (c.inject_duplicate_macs) {
    std::vector<SimDevice*> firsts;
    for (auto& hh : households_) {
      for (auto& d : hh.devices) {
        if (d.kind == DeviceKind::Eui64) {
          firsts.push_back(&d);
          break;
        }
      }
    }
    if (firsts.size() < 2ull * c.duplicate_mac_pairs) {
      throw ConfigError({fmt::format("simulation.duplicate_mac_pairs: {} pairs need {} EUI-64 households, only {} drawn",
                                     c.duplicate_mac_pairs, 2ull * c.duplicate_mac_pairs, firsts.size())});
    }
    for (std::uint32_t i = 0; i < c.duplicate_mac_pairs; ++i) {
      firsts[2 * i + 1]->mac = firsts[2 * i]->mac;
      firsts[2 * i + 1]->manufacturer = firsts[2 * i]->manufacturer;
    }
  }
}

// ---------------------------------------------------------------------------
// Addressing

Prefix Simulator::end_user_prefix(std::uint32_t household, std::uint32_t epoch) const {
  const std::uint64_t index = std::uint64_t{epoch} * config_.households + household;
  const auto& base = config_.end_user_base;
  return Prefix{Address128{base.bits.hi | (index << 8), 0}, 56};
}

Prefix Simulator::periphery_prefix(std::uint32_t household) const {
  const std::uint64_t index = household % std::max<std::uint32_t>(config_.periphery_pool_size, 1);
  const auto& base = config_.periphery_base;
  return Prefix{Address128{base.bits.hi | (index << 8), 0}, 56};
}

std::uint32_t Simulator::epoch_of(std::int64_t timestamp) const {
  return static_cast<std::uint32_t>((timestamp - config_.start_time) / config_.rotation_period);
}

Iid64 Simulator::privacy_iid(std::uint32_t household, std::uint32_t device, std::uint32_t epoch,
                             std::uint64_t regen) const {
  Rng rng(derive_seed({config_.seed, kTagPrivacy, household, device, epoch, regen}));
  return random_privacy_iid(rng, config_.exclude_fffe_collisions);
}

Address128 Simulator::address_of(const SimHousehold& h, const SimDevice& d, std::int64_t timestamp) const {
  if (d.kind == DeviceKind::Cpe) {
    return Address128{periphery_prefix(h.id).bits.hi, eui64_from_mac(*d.mac).bits};
  }
  const std::uint32_t epoch = epoch_of(timestamp);
  const std::uint64_t hi = end_user_prefix(h.id, epoch).bits.hi | h.subnet;
  if (d.kind == DeviceKind::Eui64) return Address128{hi, eui64_from_mac(*d.mac).bits};
  const std::int64_t epoch_start = config_.start_time + std::int64_t{epoch} * config_.rotation_period;
  const std::uint64_t regen = config_.privacy_regen_interval > 0
                                  ? static_cast<std::uint64_t>((timestamp - epoch_start) / config_.privacy_regen_interval)
                                  : 0;
  return Address128{hi, privacy_iid(h.id, d.id, epoch, regen).bits};
}

std::vector<Assignment> Simulator::assignments() const {
  std::vector<Assignment> out;
  const auto& c = config_;
  const std::int64_t end = c.start_time + c.duration;
  for (const auto& h : households_) {
    for (const auto& d : h.devices) {
      for (std::uint32_t e = 0; e < c.epochs(); ++e) {
        const std::int64_t epoch_start = c.start_time + std::int64_t{e} * c.rotation_period;
        const std::int64_t epoch_end = std::min(end, epoch_start + c.rotation_period);
        const Prefix prefix = d.kind == DeviceKind::Cpe ? periphery_prefix(h.id) : end_user_prefix(h.id, e);
        const std::int64_t step =
            d.kind == DeviceKind::Privacy && c.privacy_regen_interval > 0 ? c.privacy_regen_interval : c.rotation_period;
        for (std::int64_t t = epoch_start; t < epoch_end; t += step) {
          out.push_back(Assignment{h.id, d.id, e, t, prefix, address_of(h, d, t)});
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flows

std::vector<SimFlow> Simulator::slot_flows(std::uint64_t slot) const {
  const auto& c = config_;
  const std::int64_t t0 = c.start_time + static_cast<std::int64_t>(slot) * c.contact_interval;
  struct Tagged {
    SimFlow f;
    std::uint32_t seq;
  };
  std::vector<Tagged> out;
  for (const auto& h : households_) {
    Rng rng(derive_seed({c.seed, kTagContacts, h.id, slot}));
    std::uint32_t seq = 0;
    for (const auto& d : h.devices) {
      for (std::size_t pi = 0; pi < c.providers.size(); ++pi) {
        const auto& p = c.providers[pi];
        double prob = d.kind == DeviceKind::Eui64 ? p.p_eui64 : d.kind == DeviceKind::Cpe ? p.p_cpe : p.p_privacy;
        if (d.kind != DeviceKind::Privacy && !provider_allowed_[pi].empty() &&
            !std::binary_search(provider_allowed_[pi].begin(), provider_allowed_[pi].end(), d.manufacturer)) {
          prob = 0.0;
        }
        if (!rng.bernoulli(prob)) continue;
        const std::uint64_t n = 1 + rng.poisson(c.flows_per_contact - 1.0);
        for (std::uint64_t k = 0; k < n; ++k) {
          FlowRecord f;
          f.timestamp = t0 + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(c.contact_interval)));
          f.src = address_of(h, d, f.timestamp);
          const Address128 host{p.prefix.length >= 64 ? 0 : rng.next(), rng.next()};
          const Address128 keep = mask_address(Address128{~0ULL, ~0ULL}, p.prefix.length);
          f.dst = Address128{p.prefix.bits.hi | (host.hi & ~keep.hi), p.prefix.bits.lo | (host.lo & ~keep.lo)};
          f.protocol = p.protocol;
          f.src_port = static_cast<std::uint16_t>(49152 + rng.below(16384));
          f.dst_port = p.ports[rng.below(p.ports.size())];
          f.packets = 1 + rng.below(20);
          f.bytes = f.packets * (60 + rng.below(1400));
          f.sampling_rate = c.sampling_rate;
          out.push_back(Tagged{SimFlow{f, FlowOwner{h.id, d.id}}, seq++});
        }
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Tagged& a, const Tagged& b) {
    return std::tie(a.f.flow.timestamp, a.f.owner.household, a.f.owner.device, a.seq) <
           std::tie(b.f.flow.timestamp, b.f.owner.household, b.f.owner.device, b.seq);
  });
  std::vector<SimFlow> flows;
  flows.reserve(out.size());
  for (auto& t : out) flows.push_back(t.f);
  return flows;
}

void Simulator::run(const std::function<void(const SimFlow&)>& sink) const {
  for (std::uint64_t s = 0; s < config_.slots(); ++s) {
    for (const auto& f : slot_flows(s)) sink(f);
  }
}

// ---------------------------------------------------------------------------
// Files

std::string Simulator::oui_registry_csv() const {
  std::string out = "# oui,organization,address\n";
  for (const auto& m : config_.manufacturers) {
    fmt::format_to(std::back_inserter(out), "{},{},\n", format_oui(m.oui), text::csv_field(m.organization));
  }
  return out;
}

std::string Simulator::taxonomy_csv() const {
  std::string out = "# oui,categories,iot_category\n";
  for (const auto& m : config_.manufacturers) {
    fmt::format_to(std::back_inserter(out), "{},{},{}\n", format_oui(m.oui), m.categories.to_string(),
                   m.iot ? to_string(*m.iot) : std::string_view{});
  }
  return out;
}

std::string Simulator::providers_csv() const {
  std::string out = "# prefix,provider_id\n";
  for (const auto& p : config_.providers) {
    fmt::format_to(std::back_inserter(out), "{},{}\n", format_prefix(p.prefix), text::csv_field(p.name));
  }
  return out;
}

std::string Simulator::signatures_csv() const {
  std::string out = "# product_id,provider_or_prefix,port\n";
  for (const auto& pr : config_.products) {
    for (const auto& [name, port] : pr.targets) {
      fmt::format_to(std::back_inserter(out), "{},{},{}\n", text::csv_field(pr.name), text::csv_field(name),
                     port ? std::to_string(*port) : std::string{});
    }
  }
  return out;
}

std::string Simulator::households_csv() const {
  std::string out = "household_id,device_id,kind,mac,oui,manufacturer,categories,subnet_id\n";
  for (const auto& h : households_) {
    for (const auto& d : h.devices) {
      const ManufacturerSpec* m = d.manufacturer == kNoManufacturer ? nullptr : &config_.manufacturers[d.manufacturer];
      fmt::format_to(std::back_inserter(out), "{},{},{},{},{},{},{},{}\n", h.id, d.id, to_string(d.kind),
                     d.mac ? format_mac(*d.mac) : "", m ? format_oui(m->oui) : "", m ? text::csv_field(m->name) : "",
                     m ? m->categories.to_string() : "", h.subnet);
    }
  }
  return out;
}

std::string Simulator::assignments_csv() const {
  std::string out = "household_id,device_id,epoch,valid_from,prefix,address\n";
  for (const auto& a : assignments()) {
    fmt::format_to(std::back_inserter(out), "{},{},{},{},{},{}\n", a.household, a.device, a.epoch, a.valid_from,
                   format_prefix(a.prefix), format_address(a.address));
  }
  return out;
}

}  // namespace eui64leak

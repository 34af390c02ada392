#pragma once

// Synthetic ISP: households with EUI-64 and privacy-extension devices behind
// rotating /56 delegations, CPE WAN interfaces in a periphery pool, and a
// destination catalog contacted under a per-(device, provider, slot)
// Bernoulli model.
//
// Config schema (sectioned key = value, see data/demo/demo.conf):
//
//   [simulation]   scalar settings (SimConfig fields of the same name)
//   [manufacturer.NAME]
//     oui, organization, weight, categories (A|B), iot (optional)
//   [provider.NAME]
//     prefix, ports (comma list), protocol, p_eui64, p_privacy, p_cpe,
//     manufacturers (optional comma list restricting EUI-64/CPE senders)
//   [product.NAME]
//     targets (comma list of PROVIDER or PROVIDER@PORT)

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eui64leak/address.hpp"
#include "eui64leak/flows.hpp"
#include "eui64leak/oui.hpp"
#include "eui64leak/random.hpp"

namespace eui64leak {

struct ManufacturerSpec {
  std::string name;
  Oui oui;
  std::string organization;
  double weight = 1.0;
  CategorySet categories;
  std::optional<IoTCategory> iot;

  // CPE manufacturers equip gateways; all others equip home devices.
  bool is_cpe() const noexcept { return categories.contains(DeviceCategory::CPE); }
};

struct ProviderSpec {
  std::string name;
  Prefix prefix;
  std::vector<std::uint16_t> ports;
  std::uint8_t protocol = kProtoTcp;
  double p_eui64 = 0.0;
  double p_privacy = 0.0;
  double p_cpe = 0.0;
  std::vector<std::string> manufacturers;  // empty = no restriction
};

struct ProductSpec {
  std::string name;
  std::vector<std::pair<std::string, std::optional<std::uint16_t>>> targets;  // provider, port
};

struct SimConfig {
  std::uint64_t seed = 1;
  std::uint32_t households = 1000;
  std::int64_t start_time = 1626220800;
  std::int64_t duration = 86400;
  std::int64_t rotation_period = 86400;
  std::int64_t contact_interval = 3600;
  double p_eui64_household = 0.19;
  double p_dual_given_eui64 = 0.93;
  std::uint32_t eui64_devices_min = 1;
  std::uint32_t eui64_devices_max = 2;
  std::uint32_t privacy_devices_min = 1;
  std::uint32_t privacy_devices_max = 3;
  double flows_per_contact = 1.0;
  std::int64_t privacy_regen_interval = 0;  // 0 = once per epoch
  bool exclude_fffe_collisions = true;
  bool inject_duplicate_macs = false;
  std::uint32_t duplicate_mac_pairs = 1;
  std::uint32_t sampling_rate = 1;
  std::uint32_t periphery_pool_size = 0;  // 0 = no CPE WAN traffic
  Prefix end_user_base{Address128{0x2001'0db8'0000'0000ULL, 0}, 32};
  Prefix periphery_base{Address128{0x2001'0db9'0000'0000ULL, 0}, 32};

  std::vector<ManufacturerSpec> manufacturers;
  std::vector<ProviderSpec> providers;
  std::vector<ProductSpec> products;

  // Throws ParseError for syntax problems and ConfigError listing every
  // schema or validation violation by key path.
  static SimConfig parse(std::istream& in);
  static SimConfig load_file(const std::filesystem::path& path);

  // Empty when valid.
  std::vector<std::string> validate() const;

  std::uint32_t epochs() const noexcept {
    return rotation_period > 0 ? static_cast<std::uint32_t>((duration + rotation_period - 1) / rotation_period) : 0;
  }
  std::uint64_t slots() const noexcept {
    return contact_interval > 0 ? static_cast<std::uint64_t>(duration / contact_interval) : 0;
  }

  // Every setting as (key path, canonical value), in schema order.
  std::vector<std::pair<std::string, std::string>> resolved() const;
};

enum class DeviceKind : std::uint8_t { Eui64, Privacy, Cpe };
std::string_view to_string(DeviceKind k) noexcept;

inline constexpr std::size_t kNoManufacturer = static_cast<std::size_t>(-1);

struct SimDevice {
  std::uint32_t id = 0;  // within the household
  DeviceKind kind = DeviceKind::Privacy;
  std::optional<Mac48> mac;
  std::size_t manufacturer = kNoManufacturer;  // index into SimConfig::manufacturers
};

struct SimHousehold {
  std::uint32_t id = 0;
  std::uint8_t subnet = 0;  // the home LAN /64 inside each delegated /56
  std::vector<SimDevice> devices;

  bool has_eui64() const noexcept;
  bool has_privacy() const noexcept;
};

struct Assignment {
  std::uint32_t household = 0;
  std::uint32_t device = 0;
  std::uint32_t epoch = 0;
  std::int64_t valid_from = 0;
  Prefix prefix;  // /56 (end-user delegation or periphery pool prefix)
  Address128 address;
};

struct FlowOwner {
  std::uint32_t household = 0;
  std::uint32_t device = 0;

  friend bool operator==(const FlowOwner&, const FlowOwner&) = default;
};

struct SimFlow {
  FlowRecord flow;
  FlowOwner owner;
};

// A 64-bit IID with the U/L bit cleared and 63 uniform bits. With
// `exclude_fffe` the result never looks like an EUI-64 IID.
Iid64 random_privacy_iid(Rng& rng, bool exclude_fffe);

class Simulator {
 public:
  // Validates (ConfigError) and builds the device population.
  explicit Simulator(SimConfig config);

  const SimConfig& config() const noexcept { return config_; }
  const std::vector<SimHousehold>& households() const noexcept { return households_; }

  Prefix end_user_prefix(std::uint32_t household, std::uint32_t epoch) const;
  Prefix periphery_prefix(std::uint32_t household) const;
  std::uint32_t epoch_of(std::int64_t timestamp) const;
  // Source address of a device at a given time.
  Address128 address_of(const SimHousehold& h, const SimDevice& d, std::int64_t timestamp) const;

  // Every address each device holds, by household, device, epoch, and
  // regeneration slot.
  std::vector<Assignment> assignments() const;

  // Flows of one contact slot, ordered by (timestamp, household, device,
  // sequence). Independent of every other slot.
  std::vector<SimFlow> slot_flows(std::uint64_t slot) const;
  // All slots in order.
  void run(const std::function<void(const SimFlow&)>& sink) const;

  // Registry/taxonomy/provider/signature files matching the config, in the
  // formats the analyzer loads.
  std::string oui_registry_csv() const;
  std::string taxonomy_csv() const;
  std::string providers_csv() const;
  std::string signatures_csv() const;
  std::string households_csv() const;
  std::string assignments_csv() const;

 private:
  void build_population();
  Iid64 privacy_iid(std::uint32_t household, std::uint32_t device, std::uint32_t epoch, std::uint64_t regen) const;

  SimConfig config_;
  std::vector<SimHousehold> households_;
  std::vector<std::vector<std::size_t>> provider_allowed_;  // per provider: manufacturer indices, sorted
};

}  // namespace eui64leak

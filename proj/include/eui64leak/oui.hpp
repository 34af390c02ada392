#pragma once

// IEEE OUI registry and the manufacturer category taxonomy.
//
// Registry lines:  HEXOUI,OrganizationName,OrganizationAddress
// Taxonomy lines:  HEXOUI,Cat1|Cat2|...,IoTSubcategory?
// '#' lines and blank lines are ignored in both.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "eui64leak/address.hpp"

namespace eui64leak {

enum class DeviceCategory : std::uint8_t {
  IoT,
  Computers,
  Mobile,
  CPE,
  PartsManufacturer,
  NetworkEquipment,
  GamingConsole,
  Unknown,
  VirtualMachine,
};
inline constexpr int kDeviceCategoryCount = 9;

enum class IoTCategory : std::uint8_t {
  Entertainment,
  NetworkAttachedStorage,
  RaspberryPi,
  SmartHome,
  Varied,
  PartsManufacturer,
  HomeAppliance,
  Surveillance,
  PointOfSale,
};
inline constexpr int kIoTCategoryCount = 9;

std::string_view to_string(DeviceCategory c) noexcept;
std::string_view to_string(IoTCategory c) noexcept;
std::optional<DeviceCategory> parse_device_category(std::string_view token) noexcept;
std::optional<IoTCategory> parse_iot_category(std::string_view token) noexcept;

// Set of device categories as a bitmask in enumeration order.
class CategorySet {
 public:
  constexpr CategorySet() = default;
  constexpr explicit CategorySet(DeviceCategory c) : mask_(bit(c)) {}

  constexpr void insert(DeviceCategory c) noexcept { mask_ |= bit(c); }
  constexpr bool contains(DeviceCategory c) const noexcept { return (mask_ & bit(c)) != 0; }
  constexpr bool empty() const noexcept { return mask_ == 0; }
  constexpr bool only(DeviceCategory c) const noexcept { return mask_ == bit(c); }
  constexpr std::uint16_t mask() const noexcept { return mask_; }

  // "IoT|Computers|Mobile" in enumeration order.
  std::string to_string() const;
  // Parses a '|' separated list; nullopt on any unknown token or empty list.
  static std::optional<CategorySet> parse(std::string_view text);

  friend constexpr bool operator==(CategorySet, CategorySet) = default;

 private:
  static constexpr std::uint16_t bit(DeviceCategory c) noexcept {
    return static_cast<std::uint16_t>(1u << static_cast<unsigned>(c));
  }
  std::uint16_t mask_ = 0;
};

struct OuiRecord {
  Oui oui;
  std::string organization_name;
  std::string organization_address;

  friend bool operator==(const OuiRecord&, const OuiRecord&) = default;
};

struct LoadStats {
  std::size_t records = 0;
  std::size_t skipped = 0;     // malformed lines
  std::size_t duplicates = 0;  // re-registrations resolved last-wins
};

class OuiDatabase {
 public:
  static OuiDatabase load(std::istream& in);
  static OuiDatabase load_file(const std::filesystem::path& path);

  void insert(OuiRecord record);

  const OuiRecord* lookup(Oui oui) const noexcept;
  const OuiRecord* lookup(const Mac48& mac) const noexcept { return lookup(mac.oui()); }

  std::size_t size() const noexcept { return records_.size(); }
  const LoadStats& stats() const noexcept { return stats_; }
  // Organization name for reports; empty when the OUI is not registered.
  std::string organization(Oui oui) const;

 private:
  std::unordered_map<Oui, OuiRecord> records_;
  LoadStats stats_;
};

struct TaxonomyEntry {
  CategorySet categories;
  std::optional<IoTCategory> iot;

  friend bool operator==(const TaxonomyEntry&, const TaxonomyEntry&) = default;
};

class Taxonomy {
 public:
  static Taxonomy load(std::istream& in);
  static Taxonomy load_file(const std::filesystem::path& path);

  // Rejects an IoT subcategory on anything but an IoT-only manufacturer.
  void insert(Oui oui, TaxonomyEntry entry);

  // Taxonomy entry, or ({Unknown}, none) for unmapped OUIs.
  TaxonomyEntry categorize(Oui oui) const;

  // Taxonomy OUIs missing from `db`, ascending.
  std::vector<Oui> unregistered(const OuiDatabase& db) const;

  std::size_t size() const noexcept { return entries_.size(); }
  const LoadStats& stats() const noexcept { return stats_; }

 private:
  std::unordered_map<Oui, TaxonomyEntry> entries_;
  LoadStats stats_;
};

}  // namespace eui64leak

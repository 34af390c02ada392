#include "eui64leak/oui.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>

#include <fmt/format.h>

#include "eui64leak/errors.hpp"
#include "eui64leak/text.hpp"

namespace eui64leak {

namespace {

constexpr std::array<std::string_view, kDeviceCategoryCount> kDeviceNames = {
    "IoT", "Computers", "Mobile", "CPE", "PartsManufacturer", "NetworkEquipment", "GamingConsole", "Unknown",
    "VirtualMachine"};

constexpr std::array<std::string_view, kIoTCategoryCount> kIoTNames = {
    "Entertainment", "NetworkAttachedStorage", "RaspberryPi",  "SmartHome",  "Varied",
    "PartsManufacturer", "HomeAppliance",      "Surveillance", "PointOfSale"};

std::optional<Oui> try_oui(std::string_view s) {
  try {
    return parse_oui(s);
  } catch (const ParseError&) {
    return std::nullopt;
  }
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()));
  return in;
}

}  // namespace

std::string_view to_string(DeviceCategory c) noexcept { return kDeviceNames[static_cast<std::size_t>(c)]; }
std::string_view to_string(IoTCategory c) noexcept { return kIoTNames[static_cast<std::size_t>(c)]; }

std::optional<DeviceCategory> parse_device_category(std::string_view token) noexcept {
  for (std::size_t i = 0; i < kDeviceNames.size(); ++i) {
    if (kDeviceNames[i] == token) return static_cast<DeviceCategory>(i);
  }
  return std::nullopt;
}

std::optional<IoTCategory> parse_iot_category(std::string_view token) noexcept {
  for (std::size_t i = 0; i < kIoTNames.size(); ++i) {
    if (kIoTNames[i] == token) return static_cast<IoTCategory>(i);
  }
  return std::nullopt;
}

std::string CategorySet::to_string() const {
  std::string out;
  for (int i = 0; i < kDeviceCategoryCount; ++i) {
    auto c = static_cast<DeviceCategory>(i);
    if (!contains(c)) continue;
    if (!out.empty()) out += '|';
    out += eui64leak::to_string(c);
  }
  return out;
}

std::optional<CategorySet> CategorySet::parse(std::string_view s) {
  CategorySet set;
  while (true) {
    auto bar = s.find('|');
    auto tok = text::trim(s.substr(0, bar));
    auto c = parse_device_category(tok);
    if (!c) return std::nullopt;
    set.insert(*c);
    if (bar == std::string_view::npos) break;
    s.remove_prefix(bar + 1);
  }
  return set;
}

void OuiDatabase::insert(OuiRecord record) {
  auto [it, inserted] = records_.insert_or_assign(record.oui, std::move(record));
  if (!inserted) ++stats_.duplicates;
  stats_.records = records_.size();
}

OuiDatabase OuiDatabase::load(std::istream& in) {
  OuiDatabase db;
  std::string line;
  while (std::getline(in, line)) {
    if (text::is_comment_or_blank(line)) continue;
    auto fields = text::split_csv(line);
    std::optional<Oui> oui;
    if (fields && fields->size() == 3) oui = try_oui((*fields)[0]);
    if (!oui || (*fields)[1].empty()) {
      ++db.stats_.skipped;
      continue;
    }
    db.insert(OuiRecord{*oui, std::move((*fields)[1]), std::move((*fields)[2])});
  }
  if (in.bad()) throw IoError("error while reading OUI registry");
  return db;
}

OuiDatabase OuiDatabase::load_file(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return load(in);
}

const OuiRecord* OuiDatabase::lookup(Oui oui) const noexcept {
  auto it = records_.find(oui);
  return it == records_.end() ? nullptr : &it->second;
}

std::string OuiDatabase::organization(Oui oui) const {
  const auto* r = lookup(oui);
  return r ? r->organization_name : std::string{};
}

void Taxonomy::insert(Oui oui, TaxonomyEntry entry) {
  if (entry.categories.empty()) throw InvalidInput(fmt::format("taxonomy entry {} has no category", format_oui(oui)));
  if (entry.iot && !entry.categories.only(DeviceCategory::IoT)) {
    throw InvalidInput(fmt::format("taxonomy entry {}: IoT subcategory requires category set exactly {{IoT}}",
                                   format_oui(oui)));
  }
  auto [it, inserted] = entries_.insert_or_assign(oui, entry);
  if (!inserted) ++stats_.duplicates;
  stats_.records = entries_.size();
}

Taxonomy Taxonomy::load(std::istream& in) {
  Taxonomy tax;
  std::string line;
  while (std::getline(in, line)) {
    if (text::is_comment_or_blank(line)) continue;
    auto fields = text::split_csv(line);
    if (!fields || fields->size() < 2 || fields->size() > 3) {
      ++tax.stats_.skipped;
      continue;
    }
    auto oui = try_oui((*fields)[0]);
    auto cats = CategorySet::parse((*fields)[1]);
    std::optional<IoTCategory> iot;
    bool iot_ok = true;
    if (fields->size() == 3 && !(*fields)[2].empty()) {
      iot = parse_iot_category((*fields)[2]);
      iot_ok = iot.has_value();
    }
    if (!oui || !cats || !iot_ok || (iot && !cats->only(DeviceCategory::IoT))) {
      ++tax.stats_.skipped;
      continue;
    }
    tax.insert(*oui, TaxonomyEntry{*cats, iot});
  }
  if (in.bad()) throw IoError("error while reading taxonomy");
  return tax;
}

Taxonomy Taxonomy::load_file(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return load(in);
}

TaxonomyEntry Taxonomy::categorize(Oui oui) const {
  auto it = entries_.find(oui);
  if (it == entries_.end()) return TaxonomyEntry{CategorySet(DeviceCategory::Unknown), std::nullopt};
  return it->second;
}

std::vector<Oui> Taxonomy::unregistered(const OuiDatabase& db) const {
  std::vector<Oui> out;
  for (const auto& [oui, _] : entries_) {
    if (!db.lookup(oui)) out.push_back(oui);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace eui64leak

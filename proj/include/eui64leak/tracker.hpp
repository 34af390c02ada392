#pragma once

// Per-/56 prefix profiles, rotation linkage through shared EUI-64 IIDs, and
// periphery (CPE WAN) prefix detection.

#include <bitset>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "eui64leak/address.hpp"
#include "eui64leak/flows.hpp"
#include "eui64leak/oui.hpp"

namespace eui64leak {

using PrefixToken = std::uint64_t;
using ProviderIndex = std::uint32_t;
using SubnetSet = std::bitset<256>;
using PrefixTokenSet = std::unordered_set<PrefixToken>;

// IID -> /64 subnets of the prefix in which it was seen.
using IidSubnets = std::unordered_map<std::uint64_t, SubnetSet>;
// Provider -> earliest contact timestamp.
using ContactTimes = std::unordered_map<ProviderIndex, std::int64_t>;

struct PrefixProfile {
  PrefixToken token = 0;
  SubnetSet subnets;
  IidSubnets eui64_iids;
  IidSubnets other_iids;
  ContactTimes eui64_contacts;  // providers contacted by EUI-64 sources
  ContactTimes other_contacts;  // providers contacted by non-EUI-64 sources
  std::int64_t first_seen = INT64_MAX;
  std::int64_t last_seen = INT64_MIN;

  void add(const AnonymizedAddress& src, std::int64_t timestamp, std::optional<ProviderIndex> provider);
  void merge(const PrefixProfile& other);

  // OUI -> number of distinct EUI-64 IIDs carrying it.
  std::unordered_map<Oui, std::size_t> manufacturers() const;

  friend bool operator==(const PrefixProfile&, const PrefixProfile&) = default;
};

enum class PrefixClass { Eui64Only, NonEui64Only, DualType };

std::string_view to_string(PrefixClass c) noexcept;

// Throws ContractViolation for a profile with no IIDs at all.
PrefixClass classify(const PrefixProfile& profile);

class ProfileStore {
 public:
  void accumulate(const AnonymizedAddress& src, std::int64_t timestamp, std::optional<ProviderIndex> provider);
  // Set-union merge; associative and commutative.
  void merge(ProfileStore&& other);

  const PrefixProfile* find(PrefixToken token) const;
  std::size_t size() const noexcept { return profiles_.size(); }
  bool empty() const noexcept { return profiles_.empty(); }

  // Profiles in ascending token order, optionally skipping `excluded`.
  std::vector<const PrefixProfile*> sorted(const PrefixTokenSet* excluded = nullptr) const;

  const std::unordered_map<PrefixToken, PrefixProfile>& profiles() const noexcept { return profiles_; }

  friend bool operator==(const ProfileStore&, const ProfileStore&) = default;

 private:
  std::unordered_map<PrefixToken, PrefixProfile> profiles_;
};

struct TrackingComponent {
  std::optional<Iid64> tracking_iid;  // least EUI-64 IID of the component
  std::vector<PrefixToken> members;   // ascending

  friend bool operator==(const TrackingComponent&, const TrackingComponent&) = default;
};

class TrackingTable {
 public:
  TrackingTable() = default;
  explicit TrackingTable(std::vector<TrackingComponent> components);

  // Components ordered by tracking IID, then IID-less ones by first member.
  const std::vector<TrackingComponent>& components() const noexcept { return components_; }
  std::optional<std::size_t> component_of(PrefixToken token) const;

  friend bool operator==(const TrackingTable& a, const TrackingTable& b) { return a.components_ == b.components_; }

 private:
  std::vector<TrackingComponent> components_;
  std::unordered_map<PrefixToken, std::size_t> index_;
};

// Two prefixes share a component iff a chain of shared EUI-64 IIDs connects
// them. Prefixes in `excluded` take no part.
TrackingTable link_rotations(const ProfileStore& store, const PrefixTokenSet& excluded = {});

struct PeripheryThresholds {
  std::size_t min_eui64_iids = 64;  // density threshold
  double min_cpe_fraction = 0.9;    // purity threshold
};

// A prefix is periphery iff it has at least `min_eui64_iids` distinct EUI-64
// IIDs and at least `min_cpe_fraction` of them carry an OUI whose category
// set contains CPE.
PrefixTokenSet detect_periphery(const ProfileStore& store, const Taxonomy& taxonomy,
                                const PeripheryThresholds& thresholds = {});

inline Oui oui_of_eui64(std::uint64_t iid) { return mac_from_eui64(Iid64{iid}).oui(); }

}  // namespace eui64leak

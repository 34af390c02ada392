#include "eui64leak/tracker.hpp"

#include <algorithm>

#include "eui64leak/errors.hpp"
#include "eui64leak/union_find.hpp"

namespace eui64leak {

namespace {

void merge_contacts(ContactTimes& into, const ContactTimes& from) {
  for (const auto& [provider, ts] : from) {
    auto [it, inserted] = into.try_emplace(provider, ts);
    if (!inserted) it->second = std::min(it->second, ts);
  }
}

void merge_iids(IidSubnets& into, const IidSubnets& from) {
  for (const auto& [iid, subnets] : from) into[iid] |= subnets;
}

}  // namespace

void PrefixProfile::add(const AnonymizedAddress& src, std::int64_t timestamp, std::optional<ProviderIndex> provider) {
  subnets.set(src.subnet_id);
  bool eui = is_eui64(src.iid);
  (eui ? eui64_iids : other_iids)[src.iid.bits].set(src.subnet_id);
  if (provider) {
    auto& contacts = eui ? eui64_contacts : other_contacts;
    auto [it, inserted] = contacts.try_emplace(*provider, timestamp);
    if (!inserted) it->second = std::min(it->second, timestamp);
  }
  first_seen = std::min(first_seen, timestamp);
  last_seen = std::max(last_seen, timestamp);
}

void PrefixProfile::merge(const PrefixProfile& other) {
  subnets |= other.subnets;
  merge_iids(eui64_iids, other.eui64_iids);
  merge_iids(other_iids, other.other_iids);
  merge_contacts(eui64_contacts, other.eui64_contacts);
  merge_contacts(other_contacts, other.other_contacts);
  first_seen = std::min(first_seen, other.first_seen);
  last_seen = std::max(last_seen, other.last_seen);
}

std::unordered_map<Oui, std::size_t> PrefixProfile::manufacturers() const {
  std::unordered_map<Oui, std::size_t> out;
  for (const auto& [iid, _] : eui64_iids) ++out[oui_of_eui64(iid)];
  return out;
}

std::string_view to_string(PrefixClass c) noexcept {
  switch (c) {
    case PrefixClass::Eui64Only: return "eui64_only";
    case PrefixClass::NonEui64Only: return "non_eui64_only";
    case PrefixClass::DualType: return "dual_type";
  }
  return "";
}

PrefixClass classify(const PrefixProfile& profile) {
  bool eui = !profile.eui64_iids.empty();
  bool other = !profile.other_iids.empty();
  if (eui && other) return PrefixClass::DualType;
  if (eui) return PrefixClass::Eui64Only;
  if (other) return PrefixClass::NonEui64Only;
  throw ContractViolation("classify: profile has no observed IIDs");
}

void ProfileStore::accumulate(const AnonymizedAddress& src, std::int64_t timestamp,
                              std::optional<ProviderIndex> provider) {
  auto& p = profiles_[src.prefix_token];
  p.token = src.prefix_token;
  p.add(src, timestamp, provider);
}

void ProfileStore::merge(ProfileStore&& other) {
  if (profiles_.empty()) {
    profiles_ = std::move(other.profiles_);
    return;
  }
  for (auto& [token, profile] : other.profiles_) {
    auto [it, inserted] = profiles_.try_emplace(token, std::move(profile));
    if (!inserted) it->second.merge(profile);
  }
  other.profiles_.clear();
}

const PrefixProfile* ProfileStore::find(PrefixToken token) const {
  auto it = profiles_.find(token);
  return it == profiles_.end() ? nullptr : &it->second;
}

std::vector<const PrefixProfile*> ProfileStore::sorted(const PrefixTokenSet* excluded) const {
  std::vector<const PrefixProfile*> out;
  out.reserve(profiles_.size());
  for (const auto& [token, p] : profiles_) {
    if (excluded && excluded->contains(token)) continue;
    out.push_back(&p);
  }
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->token < b->token; });
  return out;
}

TrackingTable::TrackingTable(std::vector<TrackingComponent> components) : components_(std::move(components)) {
  std::sort(components_.begin(), components_.end(), [](const TrackingComponent& a, const TrackingComponent& b) {
    if (a.tracking_iid.has_value() != b.tracking_iid.has_value()) return a.tracking_iid.has_value();
    if (a.tracking_iid && *a.tracking_iid != *b.tracking_iid) return *a.tracking_iid < *b.tracking_iid;
    return a.members.front() < b.members.front();
  });
  for (std::size_t i = 0; i < components_.size(); ++i) {
    for (auto token : components_[i].members) index_.emplace(token, i);
  }
}

std::optional<std::size_t> TrackingTable::component_of(PrefixToken token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TrackingTable link_rotations(const ProfileStore& store, const PrefixTokenSet& excluded) {
  auto profiles = store.sorted(&excluded);
  DisjointSet sets(profiles.size());

  std::unordered_map<std::uint64_t, std::size_t> owner;  // EUI-64 IID -> first prefix index
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    for (const auto& [iid, _] : profiles[i]->eui64_iids) {
      auto [it, inserted] = owner.try_emplace(iid, i);
      if (!inserted) sets.unite(it->second, i);
    }
  }

  std::unordered_map<std::size_t, TrackingComponent> by_root;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    auto& comp = by_root[sets.find(i)];
    comp.members.push_back(profiles[i]->token);  // ascending: profiles are sorted
    for (const auto& [iid, _] : profiles[i]->eui64_iids) {
      if (!comp.tracking_iid || iid < comp.tracking_iid->bits) comp.tracking_iid = Iid64{iid};
    }
  }
  std::vector<TrackingComponent> comps;
  comps.reserve(by_root.size());
  for (auto& [_, c] : by_root) comps.push_back(std::move(c));
  return TrackingTable(std::move(comps));
}

PrefixTokenSet detect_periphery(const ProfileStore& store, const Taxonomy& taxonomy,
                                const PeripheryThresholds& thresholds) {
  PrefixTokenSet out;
  std::unordered_map<Oui, bool> is_cpe;
  for (const auto& [token, p] : store.profiles()) {
    std::size_t total = p.eui64_iids.size();
    if (total == 0 || total < thresholds.min_eui64_iids) continue;
    std::size_t cpe = 0;
    for (const auto& [iid, _] : p.eui64_iids) {
      Oui oui = oui_of_eui64(iid);
      auto it = is_cpe.find(oui);
      if (it == is_cpe.end()) {
        it = is_cpe.emplace(oui, taxonomy.categorize(oui).categories.contains(DeviceCategory::CPE)).first;
      }
      cpe += it->second ? 1 : 0;
    }
    if (static_cast<double>(cpe) >= thresholds.min_cpe_fraction * static_cast<double>(total)) out.insert(token);
  }
  return out;
}

}  // namespace eui64leak

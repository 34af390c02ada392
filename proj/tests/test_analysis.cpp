#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "eui64leak/analysis.hpp"
#include "eui64leak/errors.hpp"

using namespace eui64leak;

namespace {

constexpr std::uint32_t kIotOui = 0x00aa02;
constexpr std::uint32_t kPcOui = 0x00aa04;
constexpr std::uint32_t kCpeOui = 0x00aa01;
constexpr std::uint32_t kNasOui = 0x00aa05;

std::uint64_t eui(std::uint32_t oui, std::uint32_t low) {
  Mac48 m{{static_cast<std::uint8_t>(oui >> 16), static_cast<std::uint8_t>(oui >> 8), static_cast<std::uint8_t>(oui),
           static_cast<std::uint8_t>(low >> 16), static_cast<std::uint8_t>(low >> 8), static_cast<std::uint8_t>(low)}};
  return eui64_from_mac(m).bits;
}

std::uint64_t priv(std::uint64_t n) { return 0x3a00000000000000ULL | n; }

Address128 addr(std::uint64_t n56, std::uint8_t subnet, std::uint64_t iid) {
  return Address128{0x20010db800000000ULL | (n56 << 8) | subnet, iid};
}

const Address128 kHg1 = parse_address("2a00:1000::1");
const Address128 kHg2 = parse_address("2a00:2000::1");
const Address128 kOther = parse_address("2a00:9000::1");

FlowRecord flow(std::int64_t t, Address128 src, Address128 dst, std::uint16_t port = 443,
                std::uint8_t proto = kProtoTcp) {
  FlowRecord f;
  f.timestamp = t;
  f.src = src;
  f.dst = dst;
  f.protocol = proto;
  f.src_port = 50000;
  f.dst_port = port;
  f.bytes = 100;
  f.packets = 1;
  return f;
}

struct Fixture {
  OuiDatabase db;
  Taxonomy tax;
  ProviderMap providers;
  AnalysisContext ctx;

  Fixture() {
    std::istringstream r("00aa01,Gateway Co,x\n00aa02,Telly Co,x\n00aa04,Desk Co,x\n00aa05,Disk Co,x\n");
    db = OuiDatabase::load(r);
    std::istringstream t("00aa01,CPE\n00aa02,IoT,Entertainment\n00aa04,Computers\n00aa05,IoT,NetworkAttachedStorage\n");
    tax = Taxonomy::load(t);
    std::istringstream p("2a00:1000::/32,HG1\n2a00:2000::/32,HG2\n");
    providers = ProviderMap::load(p);
    ctx.providers = &providers;
    ctx.anonymize_side = AnonymizeSide::None;
  }

  FlowAccumulator run(const std::vector<FlowRecord>& flows) const {
    FlowAccumulator acc(ctx);
    for (const auto& f : flows) acc.add(f);
    return acc;
  }
};

const ShareRow* row(const ShareTable& t, std::string_view label) {
  for (const auto& r : t.rows) {
    if (r.label == label) return &r;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("provider map longest-prefix match") {
  std::istringstream in("# rules\n2a00::/16,BROAD\n2a00:1000::/32,HG1\n2a00:1000:1::/48,HG1EDGE\nbad line\n");
  auto m = ProviderMap::load(in);
  CHECK(m.stats().skipped == 1);
  CHECK(m.name(*m.lookup(parse_address("2a00:1000:1::5"))) == "HG1EDGE");
  CHECK(m.name(*m.lookup(parse_address("2a00:1000:2::5"))) == "HG1");
  CHECK(m.name(*m.lookup(parse_address("2a00:ffff::5"))) == "BROAD");
  CHECK_FALSE(m.lookup(parse_address("2001:db8::1")).has_value());
  CHECK(m.find_provider("HG1").has_value());
  CHECK_FALSE(m.find_provider("nope").has_value());
}

TEST_CASE("signature loading") {
  Fixture fx;
  std::istringstream in("tv,HG1,443\ntv,2a00:3000::/40,8883\ncam,HG2\n");
  auto sigs = load_signatures(in, fx.providers);
  REQUIRE(sigs.size() == 2);
  CHECK(sigs[0].product_id == "cam");
  CHECK(sigs[1].elements.size() == 2);
  CHECK(sigs[1].elements[1].prefix.has_value());
  CHECK(sigs[1].elements[1].port == 8883);
  std::istringstream bad("tv,NOPE,443\n");
  CHECK_THROWS_AS(load_signatures(bad, fx.providers), ParseError);
}

TEST_CASE("venn counts for three households") {
  Fixture fx;
  auto acc = fx.run({
      flow(0, addr(1, 0, eui(kIotOui, 1)), kHg1),
      flow(0, addr(2, 0, eui(kIotOui, 2)), kHg1),
      flow(0, addr(2, 0, priv(1)), kHg1),
      flow(0, addr(3, 0, priv(2)), kHg1),
      flow(0, addr(3, 0, priv(3)), kHg1),
  });
  auto profiles = acc.profiles().sorted();
  CHECK(venn_counts(profiles, VennLevel::Slash56) == VennCounts{1, 1, 1});
  CHECK(venn_counts(profiles, VennLevel::Slash64) == VennCounts{1, 1, 1});
  CHECK(venn_counts(profiles, VennLevel::Address) == VennCounts{2, 0, 3});
}

TEST_CASE("venn /64 level separates subnets") {
  Fixture fx;
  auto acc = fx.run({
      flow(0, addr(1, 1, eui(kIotOui, 1)), kHg1),
      flow(0, addr(1, 2, priv(1)), kHg1),
  });
  auto profiles = acc.profiles().sorted();
  CHECK(venn_counts(profiles, VennLevel::Slash56) == VennCounts{0, 1, 0});
  CHECK(venn_counts(profiles, VennLevel::Slash64) == VennCounts{1, 0, 1});
}

TEST_CASE("linked rotation counts once") {
  Fixture fx;
  auto acc = fx.run({
      flow(0, addr(1, 0, eui(kIotOui, 1)), kHg1),
      flow(0, addr(1, 0, priv(1)), kHg1),
      flow(86400, addr(7, 0, eui(kIotOui, 1)), kHg1),
      flow(86400, addr(7, 0, priv(2)), kHg1),
      flow(0, addr(3, 0, priv(3)), kHg1),
  });
  auto profiles = acc.profiles().sorted();
  auto table = link_rotations(acc.profiles());
  auto unlinked = venn_counts(profiles, VennLevel::Slash56);
  auto linked = venn_counts(profiles, VennLevel::Slash56, &table);
  CHECK(unlinked == VennCounts{0, 2, 1});
  CHECK(linked == VennCounts{0, 1, 1});
  CHECK(linked.both <= unlinked.both);
  CHECK(linked.eui64_only <= unlinked.eui64_only);
  CHECK(linked.non_eui64_only <= unlinked.non_eui64_only);
}

TEST_CASE("oui popularity") {
  Fixture fx;
  SUBCASE("one device per household") {
    std::vector<FlowRecord> flows;
    for (std::uint32_t h = 0; h < 30; ++h) {
      flows.push_back(flow(0, addr(h, 0, eui(h % 3 ? kIotOui : kPcOui, h)), kHg1));
      flows.push_back(flow(10, addr(h, 0, eui(h % 3 ? kIotOui : kPcOui, h)), kHg2));
    }
    auto acc = fx.run(flows);
    auto rows = oui_popularity(acc.profiles().sorted(), fx.db);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].oui == Oui{kIotOui});
    CHECK(rows[0].organization == "Telly Co");
    for (const auto& r : rows) {
      CHECK(r.distinct_iids == r.distinct_56s);
      CHECK(r.distinct_iids == r.distinct_64s);
    }
    CHECK(rows[0].distinct_iids == 20);
    CHECK(oui_popularity(acc.profiles().sorted(), fx.db, 1).size() == 1);
  }
  SUBCASE("periphery concentrates CPE IIDs") {
    std::vector<FlowRecord> flows;
    for (std::uint32_t i = 0; i < 400; ++i) flows.push_back(flow(0, addr(1000 + i % 4, 0, eui(kCpeOui, i)), kHg1));
    auto acc = fx.run(flows);
    auto rows = oui_popularity(acc.profiles().sorted(), fx.db);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].distinct_iids == 400);
    CHECK(rows[0].distinct_56s == 4);
  }
  SUBCASE("empty") { CHECK(oui_popularity({}, fx.db).empty()); }
}

TEST_CASE("category shares use equal split") {
  Fixture fx;
  SUBCASE("all IoT") {
    auto acc = fx.run({flow(0, addr(1, 0, eui(kIotOui, 1)), kHg1), flow(0, addr(2, 0, eui(kNasOui, 2)), kHg1)});
    auto t = category_shares(acc.profiles().sorted(), fx.tax);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].label == "IoT");
    CHECK(t.rows[0].share == 1.0);
  }
  SUBCASE("mixed prefix splits its weight") {
    auto acc = fx.run({
        flow(0, addr(1, 0, eui(kIotOui, 1)), kHg1),
        flow(0, addr(1, 0, eui(kPcOui, 1)), kHg1),
        flow(0, addr(2, 0, priv(1)), kHg1),
    });
    auto t = category_shares(acc.profiles().sorted(), fx.tax);
    CHECK(t.total_prefixes == 1);
    REQUIRE(t.rows.size() == 2);
    CHECK(row(t, "IoT")->weight == Rational(1, 2));
    CHECK(row(t, "Computers")->weight == Rational(1, 2));
    CHECK(row(t, "Computers")->share == 0.5);
    CHECK(row(t, "IoT")->prefixes == 1);
  }
  SUBCASE("shares sum to one") {
    std::vector<FlowRecord> flows;
    for (std::uint32_t h = 0; h < 7; ++h) {
      flows.push_back(flow(0, addr(h, 0, eui(kIotOui, h)), kHg1));
      if (h % 2) flows.push_back(flow(0, addr(h, 0, eui(kPcOui, h)), kHg1));
      if (h % 3 == 0) flows.push_back(flow(0, addr(h, 0, eui(kCpeOui, h)), kHg1));
    }
    auto t = category_shares(fx.run(flows).profiles().sorted(), fx.tax);
    Rational sum = 0;
    for (const auto& r : t.rows) sum += r.weight;
    CHECK(sum == Rational(t.total_prefixes));
  }
}

TEST_CASE("iot composition") {
  Fixture fx;
  SUBCASE("all entertainment") {
    auto acc = fx.run({flow(0, addr(1, 0, eui(kIotOui, 1)), kHg1), flow(0, addr(2, 0, eui(kIotOui, 2)), kHg1)});
    auto t = iot_composition(acc.profiles().sorted(), fx.tax);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].label == "Entertainment");
    CHECK(t.rows[0].share == 1.0);
  }
  SUBCASE("ignores mixed-category manufacturers") {
    auto acc = fx.run({flow(0, addr(1, 0, eui(kIotOui, 1)), kHg1), flow(0, addr(1, 0, eui(kNasOui, 1)), kHg1),
                       flow(0, addr(2, 0, eui(kPcOui, 2)), kHg1)});
    auto t = iot_composition(acc.profiles().sorted(), fx.tax);
    CHECK(t.total_prefixes == 1);
    CHECK(row(t, "NetworkAttachedStorage")->share == 0.5);
  }
  SUBCASE("no IoT-only prefixes") {
    auto acc = fx.run({flow(0, addr(1, 0, eui(kPcOui, 1)), kHg1)});
    auto t = iot_composition(acc.profiles().sorted(), fx.tax);
    CHECK(t.total_prefixes == 0);
    CHECK(t.rows.empty());
  }
}

TEST_CASE("mqtt proxy") {
  Fixture fx;
  SUBCASE("five EUI-64 and one privacy source") {
    std::vector<FlowRecord> flows;
    for (std::uint32_t i = 0; i < 5; ++i) flows.push_back(flow(0, addr(i, 0, eui(kIotOui, i)), kHg1, 8883));
    flows.push_back(flow(0, addr(9, 0, priv(1)), kHg1, 8883));
    flows.push_back(flow(0, addr(9, 0, priv(2)), kHg1, 8883, kProtoUdp));
    flows.push_back(flow(0, addr(9, 0, priv(3)), kHg1, 443));
    auto r = mqtt_proxy(fx.run(flows).mqtt_sources());
    CHECK(r.eui64_sources == 5);
    CHECK(r.total_sources == 6);
    REQUIRE(r.fraction.has_value());
    CHECK(*r.fraction == doctest::Approx(0.833333).epsilon(1e-5));
  }
  SUBCASE("no 8883 traffic") {
    auto r = mqtt_proxy(fx.run({flow(0, addr(1, 0, eui(kIotOui, 1)), kHg1)}).mqtt_sources());
    CHECK_FALSE(r.fraction.has_value());
    CHECK(r.total_sources == 0);
  }
  SUBCASE("privacy sources only") {
    auto r = mqtt_proxy(fx.run({flow(0, addr(1, 0, priv(1)), kHg1, 8883)}).mqtt_sources());
    REQUIRE(r.fraction.has_value());
    CHECK(*r.fraction == 0.0);
  }
}

TEST_CASE("collateral needs both source types per provider") {
  Fixture fx;
  auto acc = fx.run({
      // prefix 1: only the EUI-64 device talks to HG1
      flow(0, addr(1, 0, eui(kIotOui, 1)), kHg1),
      flow(0, addr(1, 0, priv(1)), kHg2),
      // prefix 2: both hit HG1, exposure at the later contact
      flow(100, addr(2, 0, eui(kIotOui, 2)), kHg1),
      flow(4000, addr(2, 0, priv(2)), kHg1),
      flow(0, addr(2, 0, priv(2)), kOther),
      // prefix 3: privacy only
      flow(0, addr(3, 0, priv(3)), kHg1),
  });
  auto profiles = acc.profiles().sorted();
  auto window = TimeWindow::covering(0, 4000, 3600);
  auto c = collateral_leakage(profiles, fx.providers, window);
  CHECK(c.end_user_prefixes == 3);
  CHECK(c.dual_type_prefixes == 2);
  REQUIRE(c.rows.size() == 3);
  CHECK(c.rows[0].provider_id == "HG1");
  CHECK(c.rows[0].prefixes == 1);
  CHECK(c.rows[1].provider_id == "HG2");
  CHECK(c.rows[1].prefixes == 0);
  CHECK(c.rows[2].provider_id == "*");
  CHECK(c.rows[2].prefixes == 1);
  CHECK(c.rows[0].fraction == doctest::Approx(1.0 / 3));
  for (const auto& r : c.rows) CHECK(r.prefixes <= c.dual_type_prefixes);

  REQUIRE(c.series.size() == 6);
  CHECK(c.series[0] == CollateralPoint{0, "HG1", 0});
  CHECK(c.series[3] == CollateralPoint{3600, "HG1", 1});
  CHECK(c.series[5] == CollateralPoint{3600, "*", 1});
}

TEST_CASE("product time series") {
  Fixture fx;
  std::istringstream sig("tv,HG1,443\nghost,HG2,9999\n");
  fx.ctx.products = load_signatures(sig, fx.providers);
  std::vector<FlowRecord> flows;
  const auto tv = eui(kIotOui, 1);
  for (int hour = 0; hour < 4; ++hour) flows.push_back(flow(hour * 3600 + 5, addr(1, 0, tv), kHg1));
  flows.push_back(flow(2 * 3600 + 5, addr(8, 0, tv), kHg1));  // rotated prefix, same IID
  auto acc = fx.run(flows);
  auto series = product_timeseries(acc, 1, TimeWindow::covering(acc.window_start(), acc.window_end(), 3600));
  REQUIRE(series.size() == 2);
  CHECK(series[0].product_id == "ghost");
  for (const auto& pt : series[0].points) CHECK(pt == SeriesPoint{pt.bucket_start, 0, 0, 0, 0});
  const auto& pts = series[1].points;
  REQUIRE(pts.size() == 4);
  CHECK(pts[0].eui64_iids == 1);
  CHECK(pts[0].eui64_addresses == 1);
  CHECK(pts[1].eui64_addresses == 1);
  CHECK(pts[2].eui64_addresses == 2);
  CHECK(pts[3].eui64_iids == 1);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    CHECK(pts[i].eui64_addresses >= pts[i - 1].eui64_addresses);
    CHECK(pts[i].other_addresses >= pts[i - 1].other_addresses);
  }
}

TEST_CASE("min_hits requires distinct elements") {
  Fixture fx;
  std::istringstream sig("tv,HG1,443\ntv,HG2,443\n");
  fx.ctx.products = load_signatures(sig, fx.providers);
  auto acc = fx.run({
      flow(10, addr(1, 0, eui(kIotOui, 1)), kHg1),
      flow(20, addr(1, 0, eui(kIotOui, 1)), kHg1),
      flow(3700, addr(2, 0, eui(kIotOui, 2)), kHg1),
      flow(3800, addr(2, 0, eui(kIotOui, 2)), kHg2),
  });
  auto w = TimeWindow::covering(acc.window_start(), acc.window_end(), 3600);
  auto one = product_timeseries(acc, 1, w);
  auto two = product_timeseries(acc, 2, w);
  CHECK(one[0].points.back().eui64_addresses == 2);
  CHECK(two[0].points.back().eui64_addresses == 1);
  CHECK(two[0].points.front().eui64_addresses == 0);
}

TEST_CASE("product OUI restriction applies to EUI-64 sources") {
  Fixture fx;
  std::istringstream sig("tv,HG1,443\n");
  fx.ctx.products = load_signatures(sig, fx.providers);
  fx.ctx.product_ouis = {Oui{kIotOui}};
  auto acc = fx.run({
      flow(10, addr(1, 0, eui(kIotOui, 1)), kHg1),
      flow(10, addr(2, 0, eui(kPcOui, 2)), kHg1),
      flow(10, addr(2, 0, priv(1)), kHg1),
  });
  auto s = product_timeseries(acc, 1, TimeWindow::covering(0, 10, 3600));
  CHECK(s[0].points[0].eui64_addresses == 1);
  CHECK(s[0].points[0].other_addresses == 1);
}

TEST_CASE("hamming reference and fit") {
  double total = 0, mean = 0;
  for (int k = 0; k <= 64; ++k) {
    total += hamming_reference_pmf(k);
    mean += k * hamming_reference_pmf(k);
  }
  CHECK(total == doctest::Approx(1.0));
  CHECK(mean == doctest::Approx(31.5));
  CHECK(hamming_reference_pmf(64) == 0.0);
  CHECK(chi_square_sf(3.841459, 1) == doctest::Approx(0.05).epsilon(1e-4));
  CHECK(chi_square_sf(0, 3) == 1.0);

  std::vector<std::uint64_t> few(10, 0);
  auto small = hamming_fit(few, 100);
  CHECK_FALSE(small.sufficient);
  CHECK(small.sample_size == 10);
  CHECK(small.histogram[0] == 10);

  std::vector<std::uint64_t> zeros(20000, 0);
  auto degenerate = hamming_fit(zeros, 10000);
  CHECK(degenerate.sufficient);
  CHECK(degenerate.p_value < 1e-6);
}

TEST_CASE("port heatmap") {
  Fixture fx;
  SUBCASE("single flow") {
    auto h = port_heatmap(fx.run({flow(0, addr(1, 0, eui(kIotOui, 1)), kHg1)}).port_sources(), fx.db, 50, 20);
    REQUIRE(h.ouis.size() == 1);
    REQUIRE(h.ports.size() == 1);
    CHECK(h.counts[0][0] == 1);
    CHECK(h.organizations[0] == "Telly Co");
  }
  SUBCASE("common service ports") {
    std::vector<FlowRecord> flows;
    for (std::uint16_t port : {443, 53, 123, 8883}) flows.push_back(flow(0, addr(1, 0, eui(kIotOui, 1)), kHg1, port));
    flows.push_back(flow(0, addr(2, 0, eui(kPcOui, 2)), kHg1, 443));
    flows.push_back(flow(0, addr(2, 0, priv(2)), kHg1, 22));
    auto h = port_heatmap(fx.run(flows).port_sources(), fx.db, 50, 20);
    CHECK(h.ports == std::vector<std::uint16_t>{443, 53, 123, 8883});
    CHECK(h.counts[0][0] == 1);
    CHECK(h.counts[1][0] == 1);
    CHECK(h.counts[1][1] == 0);
  }
  SUBCASE("empty") {
    auto h = port_heatmap(PairSet{}, fx.db, 50, 20);
    CHECK(h.ouis.empty());
    CHECK(h.counts.empty());
  }
}

TEST_CASE("accumulator merge matches a single pass") {
  Fixture fx;
  std::istringstream sig("tv,HG1,443\n");
  fx.ctx.products = load_signatures(sig, fx.providers);
  std::vector<FlowRecord> flows;
  for (std::uint32_t i = 0; i < 300; ++i) {
    auto iid = i % 4 ? priv(i % 37) : eui(i % 8 ? kIotOui : kPcOui, i % 11);
    flows.push_back(flow(static_cast<std::int64_t>((i * 7919) % 20000), addr(i % 13, static_cast<std::uint8_t>(i % 3), iid),
                         i % 2 ? kHg1 : kHg2, i % 5 ? 443 : 8883));
  }
  auto whole = fx.run(flows);
  FlowAccumulator a(fx.ctx), b(fx.ctx);
  for (std::size_t i = 0; i < flows.size(); ++i) (i % 3 ? a : b).add(flows[i]);
  b.merge(std::move(a));
  CHECK(b.profiles() == whole.profiles());
  CHECK(b.mqtt_sources() == whole.mqtt_sources());
  CHECK(b.port_sources() == whole.port_sources());
  CHECK(b.flows() == whole.flows());
  auto w = TimeWindow::covering(whole.window_start(), whole.window_end(), 3600);
  CHECK(product_timeseries(b, 1, w) == product_timeseries(whole, 1, w));
}

TEST_CASE("anonymization without a key is rejected") {
  Fixture fx;
  fx.ctx.anonymize_side = AnonymizeSide::Src;
  CHECK_THROWS_AS(FlowAccumulator{fx.ctx}, InvalidInput);
}

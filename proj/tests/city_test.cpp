#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "epolis/city/layout.hpp"
#include "epolis/city/state.hpp"
#include "epolis/error.hpp"
#include "epolis/kb/knowledge_base.hpp"

using namespace epolis;
using namespace epolis::city;

namespace {

LayoutParams random_params(std::mt19937_64& rng) {
  LayoutParams p;
  p.rows = std::uniform_int_distribution<int>(1, 7)(rng);
  p.cols = std::uniform_int_distribution<int>(1, 7)(rng);
  p.block_area = std::uniform_real_distribution<double>(100, 5000)(rng);
  p.road_width = std::uniform_real_distribution<double>(0, 20)(rng);
  p.density = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
  int n = p.rows * p.cols;
  p.dilemmas = std::uniform_int_distribution<int>(0, std::min(n, 23))(rng);
  p.double_blocks = std::uniform_int_distribution<int>(0, n / 2)(rng);
  p.quadruple_blocks = std::uniform_int_distribution<int>(0, n - p.double_blocks)(rng);
  p.seed = rng();
  return p;
}

// Every footprint the city occupies: block outer zones, roads and dilemma rooms.
std::vector<Box> footprints(const CityLayout& city) {
  std::vector<Box> out;
  for (const auto& b : city.blocks()) out.push_back(b.composite.outer());
  for (const auto& d : city.dilemmas()) out.push_back(d.location);
  return out;
}

// Roads share faces with blocks; anything above a rounding sliver is an overlap.
constexpr double kSliver = 1e-9;

}  // namespace

TEST(Geometry, ZoneOfCentreAndFace) {
  Composite c{{Box{1, {0, 0, 0}, {20, 100, 20}}, Box{2, {0, 0, 0}, {12, 90, 12}}}};
  EXPECT_EQ(zone_of(c, {0, 0, 0}), ZoneHit::Inner);
  EXPECT_EQ(zone_of(c, {20, 0, 5}), ZoneHit::OuterOnly);
  EXPECT_EQ(zone_of(c, {12, 0, 0}), ZoneHit::Inner);
  EXPECT_EQ(zone_of(c, {20.001, 0, 0}), ZoneHit::None);
}

TEST(Geometry, CompositeValidation) {
  EXPECT_NO_THROW((Composite{{Box{1, {}, {2, 2, 2}}, Box{2, {}, {1, 1, 1}}}}.validate()));
  EXPECT_THROW((Composite{{Box{1, {}, {2, 2, 2}}}}.validate()), Error);
  EXPECT_THROW((Composite{{Box{1, {}, {2, 2, 2}}, Box{2, {}, {2, 1, 1}}}}.validate()), Error);
  EXPECT_THROW((Composite{{Box{1, {}, {2, 2, 2}}, Box{2, {0.5, 0, 0}, {1, 1, 1}}}}.validate()), Error);
  EXPECT_THROW((Composite{{Box{1, {}, {2, 2, 2}}, Box{2, {}, {0, 1, 1}}}}.validate()), Error);
}

TEST(Geometry, StraightWalksCrossZonesInOrder) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int walk = 0; walk < 100; ++walk) {
    double h = 5 + 30 * std::abs(u(rng));
    Composite c{{Box{1, {u(rng) * 50, 0, u(rng) * 50}, {h, 100, h}},
                 Box{2, {}, {h * 0.6, 90, h * 0.6}}}};
    c.levels[1].centre = c.levels[0].centre;
    double angle = u(rng) * M_PI;
    Vec3 dir{std::cos(angle), 0, std::sin(angle)};
    std::vector<ZoneHit> seen;
    for (double s = -3 * h; s <= 3 * h; s += h / 200) {
      Vec3 p{c.outer().centre.x + s * dir.x, 0, c.outer().centre.z + s * dir.z};
      ZoneHit z = zone_of(c, p);
      if (seen.empty() || seen.back() != z) seen.push_back(z);
    }
    std::vector<ZoneHit> expected{ZoneHit::None, ZoneHit::OuterOnly, ZoneHit::Inner, ZoneHit::OuterOnly,
                                  ZoneHit::None};
    EXPECT_EQ(seen, expected) << "walk " << walk;
  }
}

TEST(Catalog, StandardCatalogHasFiveDoctrines) {
  const Catalogs& c = Catalogs::standard();
  ASSERT_EQ(c.doctrines.size(), 5u);
  EXPECT_EQ(c.pid_named("Apoliticism"), 3);
  EXPECT_EQ(c.pid_named("Conservatism"), 4);
  EXPECT_GE(c.dilemmas.size(), 20u);
  EXPECT_FALSE(c.kinds.empty());
  EXPECT_NO_THROW(c.validate());
}

TEST(Catalog, LoadMatchesEmbeddedCopy) {
  Catalogs disk = Catalogs::load(std::string(EPOLIS_DATA_DIR) + "/catalog");
  const Catalogs& std_ = Catalogs::standard();
  EXPECT_EQ(disk.kinds, std_.kinds);
  ASSERT_EQ(disk.dilemmas.size(), std_.dilemmas.size());
  for (std::size_t i = 0; i < disk.dilemmas.size(); ++i) EXPECT_EQ(disk.dilemmas[i].key, std_.dilemmas[i].key);
}

TEST(Catalog, EmptyDilemmaFileIsAnEmptyCatalog) {
  EXPECT_TRUE(parse_dilemmas("", "dilemmas.jsonl").empty());
  EXPECT_TRUE(parse_dilemmas("\n\n", "dilemmas.jsonl").empty());
}

TEST(Catalog, DuplicatePidReportsLine) {
  try {
    parse_doctrines("{\"pid\": 1, \"name\": \"A\"}\n{\"pid\": 1, \"name\": \"B\"}\n", "doctrines.jsonl");
    FAIL() << "duplicate accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Validation);
    EXPECT_NE(std::string(e.what()).find("doctrines.jsonl:2:"), std::string::npos) << e.what();
  }
}

TEST(Catalog, DilemmaNeedsFiveDistinctDoctrines) {
  std::string four = R"({"key":"k","title":"t","body":"b","media":"","choices":[)"
                     R"({"text":"a","pid":1},{"text":"b","pid":2},{"text":"c","pid":3},{"text":"d","pid":4}]})";
  EXPECT_THROW(parse_dilemmas(four, "x"), Error);
  std::string twice = R"({"key":"k","title":"t","body":"b","media":"","choices":[)"
                      R"({"text":"a","pid":1},{"text":"b","pid":1},{"text":"c","pid":3},{"text":"d","pid":4},)"
                      R"({"text":"e","pid":5}]})";
  EXPECT_THROW(parse_dilemmas(twice, "x"), Error);
}

TEST(Layout, DefaultCity) {
  CityLayout city = CityLayout::generate(LayoutParams{});
  ASSERT_EQ(city.blocks().size(), 36u);
  EXPECT_EQ(city.dilemmas().size(), 20u);
  int permanent = 0, with_dilemma = 0;
  for (const auto& b : city.blocks()) {
    EXPECT_NE(b.did.has_value(), b.permanent_pid.has_value());
    permanent += b.permanent_pid.has_value();
    with_dilemma += b.did.has_value();
    EXPECT_EQ(b.instances.size(), 5u);
    EXPECT_DOUBLE_EQ(b.composite.outer().xz_area(), 1600);
    EXPECT_NEAR(b.composite.inner().xz_area() / b.composite.outer().xz_area(), 0.36, 1e-12);
    EXPECT_GE(b.height, 10);
    EXPECT_LE(b.height, 40);
  }
  EXPECT_EQ(permanent, 16);
  EXPECT_EQ(with_dilemma, 20);
  EXPECT_EQ(city.default_pid(), 3);
  for (const auto& d : city.dilemmas()) {
    EXPECT_EQ(city.block(d.sid).did, d.did);
    ASSERT_EQ(d.choices.size(), 5u);
    for (int k = 0; k < 5; ++k) EXPECT_EQ(d.choices[k].cid, (d.did - 1) * 5 + k + 1);
  }
}

TEST(Layout, SingleBlockCity) {
  LayoutParams p;
  p.rows = p.cols = 1;
  p.dilemmas = 1;
  CityLayout city = CityLayout::generate(p);
  ASSERT_EQ(city.blocks().size(), 1u);
  ASSERT_EQ(city.dilemmas().size(), 1u);
  EXPECT_EQ(city.dilemmas()[0].sid, 1);
  EXPECT_FALSE(city.blocks()[0].permanent_pid);
}

TEST(Layout, InfeasibleParametersAreRejected) {
  LayoutParams p;
  p.dilemmas = 37;
  EXPECT_THROW(CityLayout::generate(p), Error);
  p = {};
  p.rows = 10;
  p.dilemmas = 24;  // more than the catalog holds
  EXPECT_THROW(CityLayout::generate(p), Error);
  p = {};
  p.density = 0;
  EXPECT_THROW(CityLayout::generate(p), Error);
  EXPECT_THROW(LayoutParams::from_json(R"({"rows": 2, "colour": 3})"), Error);
}

TEST(Layout, EnlargedBlocksHaveExactAreas) {
  LayoutParams p;
  p.double_blocks = 5;
  p.quadruple_blocks = 3;
  CityLayout city = CityLayout::generate(p);
  std::map<SizeClass, int> counts;
  for (const auto& b : city.blocks()) {
    counts[b.size]++;
    double want = b.size == SizeClass::Single ? 1 : b.size == SizeClass::Double ? 2 : 4;
    EXPECT_DOUBLE_EQ(b.composite.outer().xz_area(), want * p.block_area);
  }
  EXPECT_EQ(counts[SizeClass::Double], 5);
  EXPECT_EQ(counts[SizeClass::Quadruple], 3);
}

TEST(Layout, RandomCitiesNeverOverlap) {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 50; ++round) {
    LayoutParams p = random_params(rng);
    CityLayout city = CityLayout::generate(p);
    auto boxes = footprints(city);
    for (std::size_t i = 0; i < boxes.size(); ++i)
      for (std::size_t j = i + 1; j < boxes.size(); ++j)
        ASSERT_EQ(boxes[i].xz_overlap(boxes[j]), 0) << "round " << round << " rids " << boxes[i].rid << ","
                                                    << boxes[j].rid;
    for (const auto& r : city.roads())
      for (const auto& b : city.blocks())
        ASSERT_LT(r.composite.outer().xz_overlap(b.composite.outer()), kSliver) << "round " << round;
    for (const auto& b : city.blocks()) {
      EXPECT_NO_THROW(b.composite.validate());
      EXPECT_EQ(city.block_at(b.composite.outer().centre), &b);
    }
    for (int g = 0; g <= p.rows; ++g) EXPECT_EQ(city.block_at(city.road_point(g, 3.5)), nullptr);
  }
}

TEST(Layout, SameSeedSameJson) {
  LayoutParams p;
  p.double_blocks = 2;
  std::string a = CityLayout::generate(p).to_json();
  EXPECT_EQ(a, CityLayout::generate(p).to_json());
  EXPECT_EQ(CityLayout::from_json(a).to_json(), a);
  p.seed = 2;
  EXPECT_NE(a, CityLayout::generate(p).to_json());
}

TEST(Layout, ParamsRoundTrip) {
  LayoutParams p;
  p.rows = 3;
  p.dilemmas = 10;
  p.seed = 99;
  LayoutParams q = LayoutParams::from_json(p.to_json());
  EXPECT_EQ(q.rows, 3);
  EXPECT_EQ(q.seed, 99u);
  EXPECT_EQ(q.to_json(), p.to_json());
}

TEST(Layout, StaticFactsDriveTheKnowledgeBase) {
  CityLayout city = CityLayout::generate(LayoutParams{});
  kb::KnowledgeBase base;
  base.load_static(city.static_facts());
  base.add_user(1);
  const Dilemma& d = city.dilemmas().front();
  base.assert_event(kb::SalEvent::enter(1, 1000, d.sid, kb::Zone::Outer));
  base.assert_event(kb::SalEvent::enter(1, 1010, d.sid, kb::Zone::Inner));
  auto flags = base.export_flags("dilemma.");
  EXPECT_TRUE(flags["dilemma." + std::to_string(d.did) + ".open.1"]);
  base.assert_event(kb::SalEvent::choice(1, 1020, d.did, d.choices[3].cid));
  EXPECT_EQ(base.prevailing_choice(d.did).choice, d.choices[3].cid);
}

TEST(CityState, PermanentAndDilemmaBlocksStartApart) {
  CityLayout city = CityLayout::generate(LayoutParams{});
  CityState s(city);
  for (const auto& b : city.blocks()) {
    if (b.did) {
      EXPECT_EQ(s.state(b.sid).phase, BlockPhase::Disabled);
      EXPECT_EQ(s.enabled_count(b.sid), 0u);
    } else {
      EXPECT_EQ(s.state(b.sid).phase, BlockPhase::Transformed);
      EXPECT_EQ(s.state(b.sid).enabled_pid, b.permanent_pid);
    }
  }
}

TEST(CityState, ConservativeChoiceEnablesConservativeInstance) {
  CityLayout city = CityLayout::generate(LayoutParams{});
  CityState s(city);
  const Dilemma& d = city.dilemmas().front();
  std::int64_t cid = 0;
  for (const auto& c : d.choices)
    if (c.pid == 4) cid = c.cid;
  ASSERT_NE(cid, 0);
  EXPECT_TRUE(s.enable_default(d.sid));
  EXPECT_EQ(s.state(d.sid).enabled_pid, 3);
  EXPECT_FALSE(s.enable_default(d.sid));
  EXPECT_EQ(s.apply_choice(d.sid, cid), 4);
  EXPECT_EQ(s.state(d.sid).phase, BlockPhase::Transformed);
  EXPECT_EQ(city.block(d.sid).siid_for(4), (d.sid - 1) * 5 + 4);
  CityState before = s;
  EXPECT_EQ(s.apply_choice(d.sid, cid), std::nullopt);
  EXPECT_TRUE(s == before);
  EXPECT_FALSE(s.enable_default(d.sid));
}

TEST(CityState, ForeignChoiceIsRejected) {
  CityLayout city = CityLayout::generate(LayoutParams{});
  CityState s(city);
  const Dilemma& d1 = city.dilemmas()[0];
  const Dilemma& d2 = city.dilemmas()[1];
  try {
    s.apply_choice(d1.sid, d2.choices[0].cid);
    FAIL() << "foreign cid accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidChoice);
  }
  for (const auto& b : city.blocks())
    if (!b.did) {
      EXPECT_THROW(s.apply_choice(b.sid, d1.choices[0].cid), Error);
    }
  EXPECT_THROW(s.enable_default(999), Error);
}

TEST(CityState, AtMostOneInstanceEnabled) {
  CityLayout city = CityLayout::generate(LayoutParams{});
  std::mt19937_64 rng(3);
  for (int round = 0; round < 200; ++round) {
    CityState s(city);
    for (int step = 0; step < 30; ++step) {
      const auto& b = city.blocks()[rng() % city.blocks().size()];
      switch (rng() % 3) {
        case 0: s.enable_default(b.sid); break;
        case 1:
          if (b.did) s.apply_choice(b.sid, city.dilemma(*b.did).choices[rng() % 5].cid);
          break;
        default: s.set_doctrine(b.sid, static_cast<std::int64_t>(rng() % 5) + 1);
      }
      for (const auto& [sid, st] : s.states()) {
        ASSERT_LE(s.enabled_count(sid), 1u);
        EXPECT_EQ(st.phase == BlockPhase::Disabled, !st.enabled_pid.has_value());
      }
    }
  }
}

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "support/fixtures.hpp"
#include "trident/evaluation.hpp"

namespace trident::evaluation {
namespace {

ScoredSample sample(std::string id, Label label, Prediction p, YearMonth month = {2019, 10},
                    std::optional<std::string> family = std::nullopt) {
  ScoredSample s;
  s.sample_id = std::move(id);
  s.label = label;
  s.prediction = p;
  s.month = month;
  s.family = std::move(family);
  s.sandbox = "Zenbox";
  return s;
}

std::vector<ScoredSample> table_example() {
  std::vector<ScoredSample> out;
  int n = 0;
  auto add = [&](Label l, Prediction p, int count) {
    for (int i = 0; i < count; ++i) out.push_back(sample("s" + std::to_string(n++), l, p));
  };
  add(Label::malicious, Prediction::malicious, 481);
  add(Label::malicious, Prediction::benign, 16);
  add(Label::malicious, Prediction::error, 3);
  add(Label::benign, Prediction::malicious, 44);
  add(Label::benign, Prediction::benign, 456);
  return out;
}

TEST(Rates, WorkedMonth) {
  auto c = confusion(table_example());
  EXPECT_EQ(c.tp, 481u);
  EXPECT_EQ(c.malicious_error, 3u);
  EXPECT_EQ(c.malware(), 500u);
  EXPECT_EQ(c.benign(), 500u);

  auto sep = rates(c, ErrorMode::separate);
  EXPECT_NEAR(*sep.fpr, 0.088, 1e-12);
  EXPECT_NEAR(*sep.recall, 0.962, 1e-12);
  EXPECT_NEAR(*sep.fnr, 0.032, 1e-12);

  auto mal = rates(c, ErrorMode::as_malicious);
  EXPECT_NEAR(*mal.recall, 0.968, 1e-12);
  EXPECT_NEAR(*mal.fpr, 0.088, 1e-12);
  EXPECT_NEAR(*mal.precision, 484.0 / 528.0, 1e-12);

  auto ben = rates(c, ErrorMode::as_benign);
  EXPECT_NEAR(*ben.recall, 0.962, 1e-12);
  EXPECT_NEAR(*ben.fnr, 0.038, 1e-12);
}

TEST(Rates, EmptyDenominatorsAreAbsent) {
  Confusion c;
  auto r = rates(c);
  EXPECT_FALSE(r.recall);
  EXPECT_FALSE(r.fpr);
  EXPECT_FALSE(r.f1);
  c.tn = 3;
  r = rates(c);
  EXPECT_DOUBLE_EQ(*r.fpr, 0.0);
  EXPECT_FALSE(r.recall);
}

TEST(Rates, UnlabeledExcluded) {
  std::vector<ScoredSample> s = {sample("a", Label::unknown, Prediction::malicious),
                                 sample("b", Label::malicious, Prediction::malicious)};
  auto c = confusion(s);
  EXPECT_EQ(c.unlabeled, 1u);
  EXPECT_EQ(c.tp, 1u);
  EXPECT_EQ(c.fp, 0u);
}

TEST(Rates, MatchesNaiveRecount) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ScoredSample> s;
    const int n = 1 + static_cast<int>(rng() % 300);
    for (int i = 0; i < n; ++i) {
      s.push_back(sample(std::to_string(i), rng() % 2 ? Label::malicious : Label::benign,
                         static_cast<Prediction>(rng() % 3)));
    }
    for (auto mode : {ErrorMode::separate, ErrorMode::as_malicious, ErrorMode::as_benign}) {
      double tp = 0, fp = 0, mal = 0, ben = 0;
      for (const auto& x : s) {
        bool predicted_mal = x.prediction == Prediction::malicious ||
                             (x.prediction == Prediction::error && mode == ErrorMode::as_malicious);
        if (x.label == Label::malicious) {
          ++mal;
          tp += predicted_mal;
        } else {
          ++ben;
          fp += predicted_mal;
        }
      }
      auto r = rates(confusion(s), mode);
      if (mal > 0) {
        EXPECT_NEAR(*r.recall, tp / mal, 1e-12);
      }
      if (ben > 0) {
        EXPECT_NEAR(*r.fpr, fp / ben, 1e-12);
      }
    }
  }
}

TEST(Average, MacroAndPooled) {
  MonthlyMetrics a, b;
  a.counts.tp = 9;
  a.counts.fn = 1;
  a.counts.tn = 10;
  a.rates = rates(a.counts);
  b.counts.tp = 50;
  b.counts.fn = 50;
  b.counts.tn = 10;
  b.rates = rates(b.counts);
  EXPECT_NEAR(*average({a, b}).recall, 0.7, 1e-12);
  EXPECT_NEAR(*average({a, b}, ErrorMode::separate, true).recall, 59.0 / 110.0, 1e-12);
  MonthlyMetrics empty;
  EXPECT_NEAR(*average({a, empty}).recall, 0.9, 1e-12);
}

TEST(Sizes, MediansPerSandbox) {
  std::vector<ScoredSample> s;
  for (std::size_t size : {100, 200, 300}) {
    auto x = sample("tp" + std::to_string(size), Label::malicious, Prediction::malicious);
    x.size_bytes = size;
    s.push_back(x);
  }
  auto fn = sample("fn", Label::malicious, Prediction::benign);
  fn.size_bytes = 10;
  s.push_back(fn);
  auto err = sample("err", Label::malicious, Prediction::error);
  err.size_bytes = 99999;
  s.push_back(err);
  auto ben = sample("ben", Label::benign, Prediction::malicious);
  ben.size_bytes = 99999;
  s.push_back(ben);
  auto other = sample("o", Label::malicious, Prediction::malicious);
  other.sandbox = "CAPE Sandbox";
  other.size_bytes = 7;
  s.push_back(other);

  auto stats = size_analysis(s);
  ASSERT_EQ(stats.size(), 2u);
  const auto& zen = stats[0].sandbox == "Zenbox" ? stats[0] : stats[1];
  EXPECT_EQ(*zen.median_tp_bytes, 200.0);
  EXPECT_EQ(*zen.median_fn_bytes, 10.0);
  EXPECT_EQ(zen.tp, 3u);
  EXPECT_EQ(zen.fn, 1u);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_FALSE(median({}));
}

class FamilySplit : public ::testing::Test {
 protected:
  void SetUp() override {
    auto entry = [](std::string id, YearMonth m, Label l, std::optional<std::string> fam) {
      ManifestEntry e;
      e.sample_id = std::move(id);
      e.month = m;
      e.label = l;
      e.family = std::move(fam);
      e.sandbox = "Zenbox";
      e.path = e.month.str() + "/" + e.sample_id + ".json";
      return e;
    };
    const YearMonth train{2019, 9}, oct{2019, 10}, nov{2019, 11};
    std::vector<ManifestEntry> entries = {entry("t1", train, Label::malicious, "emotet"),
                                          entry("t2", train, Label::malicious, "qakbot"),
                                          entry("t3", train, Label::benign, "notmalware")};
    manifest_entries_ = entries;
    auto add = [&](std::string id, YearMonth m, Label l, std::optional<std::string> fam, Prediction p) {
      manifest_entries_.push_back(entry(id, m, l, fam));
      samples_.push_back(sample(id, l, p, m, fam));
    };
    add("a", oct, Label::malicious, "emotet", Prediction::malicious);
    add("b", oct, Label::malicious, "emotet", Prediction::benign);
    add("c", oct, Label::malicious, "newfam", Prediction::benign);
    add("d", oct, Label::malicious, std::nullopt, Prediction::benign);
    add("e", oct, Label::benign, "notmalware", Prediction::benign);
    add("f", nov, Label::malicious, "qakbot", Prediction::malicious);
    add("g", nov, Label::malicious, "other", Prediction::error);
  }

  std::vector<ManifestEntry> manifest_entries_;
  std::vector<ScoredSample> samples_;
};

TEST_F(FamilySplit, SeenAndNewColumns) {
  CorpusManifest manifest(manifest_entries_);
  auto months = monthly_metrics(samples_, manifest, {2019, 9});
  ASSERT_EQ(months.size(), 2u);
  const auto& oct = months[0];
  EXPECT_EQ(oct.month, (YearMonth{2019, 10}));
  EXPECT_EQ(oct.seen_family_malware, 2u);
  EXPECT_EQ(oct.new_family_malware, 1u);
  EXPECT_DOUBLE_EQ(*oct.fnr_seen_families, 0.5);
  EXPECT_DOUBLE_EQ(*oct.fnr_new_families, 1.0);
  EXPECT_NEAR(*oct.pct_new_family_malware, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(*oct.rates.recall, 0.25, 1e-12);

  const auto& nov = months[1];
  EXPECT_DOUBLE_EQ(*nov.fnr_new_families, 0.0);
  auto benign_mode = monthly_metrics(samples_, manifest, {2019, 9}, ErrorMode::as_benign);
  EXPECT_DOUBLE_EQ(*benign_mode[1].fnr_new_families, 1.0);
}

TEST_F(FamilySplit, OrderDoesNotMatter) {
  CorpusManifest manifest(manifest_entries_);
  auto base = monthly_metrics(samples_, manifest, {2019, 9});
  std::mt19937 rng(3);
  for (int i = 0; i < 10; ++i) {
    auto shuffled = samples_;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto again = monthly_metrics(shuffled, manifest, {2019, 9});
    ASSERT_EQ(again.size(), base.size());
    for (std::size_t m = 0; m < base.size(); ++m) {
      EXPECT_EQ(again[m].rates.recall, base[m].rates.recall);
      EXPECT_EQ(again[m].fnr_seen_families, base[m].fnr_seen_families);
      EXPECT_EQ(again[m].fnr_new_families, base[m].fnr_new_families);
    }
  }
}

TEST(Reports, WritesAllTables) {
  testing::TempDir tmp("eval");
  MethodResult r;
  r.method = "rules";
  MonthlyMetrics m;
  m.month = {2019, 10};
  m.counts = confusion(table_example());
  m.rates = rates(m.counts);
  r.months = {m};
  r.total = m.counts;
  write_reports(tmp.path(), {r}, ErrorMode::separate, false);
  for (const char* f : {"metrics.csv", "confusion.csv", "sizes.csv", "summary.md"}) {
    EXPECT_TRUE(std::filesystem::exists(tmp.path() / f)) << f;
  }
  auto metrics = testing::read_text(tmp.path() / "metrics.csv");
  EXPECT_NE(metrics.find("rules,2019-10"), std::string::npos);
  EXPECT_NE(metrics.find("0.088000"), std::string::npos);
}

TEST(Parsing, PredictionAndMode) {
  EXPECT_EQ(parse_prediction("error"), Prediction::error);
  EXPECT_EQ(parse_error_mode("as-malicious"), ErrorMode::as_malicious);
  EXPECT_THROW(parse_error_mode("bogus"), std::exception);
}

}  // namespace
}  // namespace trident::evaluation

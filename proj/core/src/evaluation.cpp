#include "trident/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "trident/csv.hpp"
#include "trident/errors.hpp"

namespace trident::evaluation {

std::string_view to_string(Prediction p) {
  switch (p) {
    case Prediction::malicious:
      return "malicious";
    case Prediction::benign:
      return "benign";
    case Prediction::error:
      return "error";
  }
  return "error";
}

Prediction parse_prediction(std::string_view text) {
  if (text == "malicious") return Prediction::malicious;
  if (text == "benign") return Prediction::benign;
  if (text == "error") return Prediction::error;
  throw DataError("unknown prediction '" + std::string(text) + "'");
}

std::string_view to_string(ErrorMode mode) {
  switch (mode) {
    case ErrorMode::separate:
      return "separate";
    case ErrorMode::as_malicious:
      return "as-malicious";
    case ErrorMode::as_benign:
      return "as-benign";
  }
  return "separate";
}

ErrorMode parse_error_mode(std::string_view text) {
  if (text == "separate") return ErrorMode::separate;
  if (text == "as-malicious" || text == "as_malicious") return ErrorMode::as_malicious;
  if (text == "as-benign" || text == "as_benign") return ErrorMode::as_benign;
  throw ConfigError("evaluation.error_mode",
                    "expected separate, as-malicious or as-benign, got '" + std::string(text) + "'");
}

Confusion& Confusion::operator+=(const Confusion& o) {
  tp += o.tp;
  fn += o.fn;
  malicious_error += o.malicious_error;
  fp += o.fp;
  tn += o.tn;
  benign_error += o.benign_error;
  unlabeled += o.unlabeled;
  return *this;
}

Confusion confusion(const std::vector<ScoredSample>& samples) {
  Confusion c;
  for (const auto& s : samples) {
    if (s.label == Label::unknown) {
      ++c.unlabeled;
      continue;
    }
    const bool mal = s.label == Label::malicious;
    switch (s.prediction) {
      case Prediction::malicious:
        ++(mal ? c.tp : c.fp);
        break;
      case Prediction::benign:
        ++(mal ? c.fn : c.tn);
        break;
      case Prediction::error:
        ++(mal ? c.malicious_error : c.benign_error);
        break;
    }
  }
  return c;
}

Confusion apply_error_mode(Confusion c, ErrorMode mode) {
  if (mode == ErrorMode::as_malicious) {
    c.tp += c.malicious_error;
    c.fp += c.benign_error;
  } else if (mode == ErrorMode::as_benign) {
    c.fn += c.malicious_error;
    c.tn += c.benign_error;
  } else {
    return c;
  }
  c.malicious_error = c.benign_error = 0;
  return c;
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

bool counts_as_fn(Prediction p, ErrorMode mode) {
  return p == Prediction::benign || (p == Prediction::error && mode == ErrorMode::as_benign);
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

std::string pct(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", *v * 100.0);
  return buf;
}

}  // namespace

Rates rates(const Confusion& raw, ErrorMode mode) {
  Confusion c = apply_error_mode(raw, mode);
  Rates r;
  r.recall = ratio(c.tp, c.malware());
  r.fnr = ratio(c.fn, c.malware());
  r.fpr = ratio(c.fp, c.benign());
  r.precision = ratio(c.tp, c.tp + c.fp);
  if (r.recall && r.precision) {
    double p = *r.precision, rc = *r.recall;
    r.f1 = p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0;
  } else if (r.recall) {
    r.f1 = 0.0;  // nothing predicted malicious
  }
  return r;
}

std::vector<MonthlyMetrics> monthly_metrics(const std::vector<ScoredSample>& samples,
                                            const CorpusManifest& manifest,
                                            YearMonth training_month, ErrorMode mode) {
  std::set<std::string> seen;
  for (const auto& e : manifest.entries()) {
    if (e.month == training_month && e.label == Label::malicious && e.family) seen.insert(*e.family);
  }
  std::map<YearMonth, std::vector<const ScoredSample*>> by_month;
  for (const auto& s : samples) by_month[s.month].push_back(&s);

  std::vector<MonthlyMetrics> out;
  for (const auto& [month, group] : by_month) {
    MonthlyMetrics m;
    m.month = month;
    std::size_t fn_seen = 0, fn_new = 0;
    std::vector<ScoredSample> copy;
    copy.reserve(group.size());
    for (const auto* s : group) {
      copy.push_back(*s);
      if (s->label != Label::malicious || !s->family) continue;
      bool is_seen = seen.count(*s->family) > 0;
      ++(is_seen ? m.seen_family_malware : m.new_family_malware);
      if (counts_as_fn(s->prediction, mode)) ++(is_seen ? fn_seen : fn_new);
    }
    m.counts = confusion(copy);
    m.rates = rates(m.counts, mode);
    m.fnr_seen_families = ratio(fn_seen, m.seen_family_malware);
    m.fnr_new_families = ratio(fn_new, m.new_family_malware);
    m.pct_new_family_malware = ratio(m.new_family_malware, m.seen_family_malware + m.new_family_malware);
    out.push_back(std::move(m));
  }
  return out;
}

Rates average(const std::vector<MonthlyMetrics>& months, ErrorMode mode, bool pooled) {
  if (pooled) {
    Confusion total;
    for (const auto& m : months) total += m.counts;
    return rates(total, mode);
  }
  auto mean = [&](auto member) -> std::optional<double> {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& m : months) {
      if (const auto& v = m.rates.*member) {
        sum += *v;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  };
  Rates r;
  r.recall = mean(&Rates::recall);
  r.precision = mean(&Rates::precision);
  r.f1 = mean(&Rates::f1);
  r.fpr = mean(&Rates::fpr);
  r.fnr = mean(&Rates::fnr);
  return r;
}

std::optional<double> median(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  auto n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

std::vector<ReportSizeStats> size_analysis(const std::vector<ScoredSample>& samples) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& s : samples) {
    if (s.label != Label::malicious || s.prediction == Prediction::error) continue;
    auto& g = groups[s.sandbox];
    (s.prediction == Prediction::malicious ? g.first : g.second)
        .push_back(static_cast<double>(s.size_bytes));
  }
  std::vector<ReportSizeStats> out;
  for (auto& [sandbox, g] : groups) {
    ReportSizeStats r;
    r.sandbox = sandbox;
    r.tp = g.first.size();
    r.fn = g.second.size();
    r.median_tp_bytes = median(std::move(g.first));
    r.median_fn_bytes = median(std::move(g.second));
    out.push_back(std::move(r));
  }
  return out;
}

void write_reports(const std::filesystem::path& dir, const std::vector<MethodResult>& results,
                   ErrorMode mode, bool pooled) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::trunc);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    return out;
  };

  auto metrics = open("metrics.csv");
  csv::write_row(metrics, {"method", "month", "tp", "fp", "tn", "fn", "malicious_error",
                           "benign_error", "recall", "precision", "f1", "fpr", "fnr",
                           "fnr_seen_families", "fnr_new_families", "pct_new_family_malware"});
  for (const auto& r : results) {
    for (const auto& m : r.months) {
      const auto& c = m.counts;
      csv::write_row(metrics, {r.method, m.month.str(), std::to_string(c.tp), std::to_string(c.fp),
                               std::to_string(c.tn), std::to_string(c.fn),
                               std::to_string(c.malicious_error), std::to_string(c.benign_error),
                               fmt(m.rates.recall), fmt(m.rates.precision), fmt(m.rates.f1),
                               fmt(m.rates.fpr), fmt(m.rates.fnr), fmt(m.fnr_seen_families),
                               fmt(m.fnr_new_families), fmt(m.pct_new_family_malware)});
    }
  }

  auto conf = open("confusion.csv");
  csv::write_row(conf, {"method", "label", "pred_malicious", "pred_benign", "pred_error"});
  for (const auto& r : results) {
    const auto& c = r.total;
    csv::write_row(conf, {r.method, "malicious", std::to_string(c.tp), std::to_string(c.fn),
                          std::to_string(c.malicious_error)});
    csv::write_row(conf, {r.method, "benign", std::to_string(c.fp), std::to_string(c.tn),
                          std::to_string(c.benign_error)});
  }

  auto sizes = open("sizes.csv");
  csv::write_row(sizes, {"method", "sandbox", "tp", "fn", "median_tp_bytes", "median_fn_bytes"});
  for (const auto& r : results) {
    for (const auto& s : r.sizes) {
      csv::write_row(sizes, {r.method, s.sandbox, std::to_string(s.tp), std::to_string(s.fn),
                             fmt(s.median_tp_bytes), fmt(s.median_fn_bytes)});
    }
  }

  auto md = open("summary.md");
  md << "| Method | Recall | F1 | FPR |\n|---|---|---|---|\n";
  for (const auto& r : results) {
    auto avg = average(r.months, mode, pooled);
    md << "| " << r.method << " | " << pct(avg.recall) << " | " << pct(avg.f1) << " | "
       << pct(avg.fpr) << " |\n";
  }
  md << "\n" << (pooled ? "Pooled over" : "Averaged over") << " test months; errors: "
     << to_string(mode) << ".\n";
}

}  // namespace trident::evaluation

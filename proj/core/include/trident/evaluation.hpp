#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trident/report_store.hpp"

namespace trident::evaluation {

enum class Prediction { malicious, benign, error };
std::string_view to_string(Prediction p);
Prediction parse_prediction(std::string_view text);

/// How error predictions enter the rates. `separate` keeps them in their own
/// column: they count in the recall and FPR denominators but as neither
/// positive nor negative.
enum class ErrorMode { separate, as_malicious, as_benign };
std::string_view to_string(ErrorMode mode);
ErrorMode parse_error_mode(std::string_view text);

struct ScoredSample {
  std::string sample_id;
  YearMonth month;
  Label label = Label::unknown;
  std::optional<std::string> family;
  std::string sandbox;
  std::size_t size_bytes = 0;
  Prediction prediction = Prediction::benign;
};

struct Confusion {
  std::size_t tp = 0, fn = 0, malicious_error = 0;
  std::size_t fp = 0, tn = 0, benign_error = 0;
  std::size_t unlabeled = 0;  // excluded

  std::size_t malware() const { return tp + fn + malicious_error; }
  std::size_t benign() const { return fp + tn + benign_error; }
  Confusion& operator+=(const Confusion& other);
};

Confusion confusion(const std::vector<ScoredSample>& samples);

/// Folds error columns according to `mode`.
Confusion apply_error_mode(Confusion c, ErrorMode mode);

struct Rates {
  std::optional<double> recall, precision, f1, fpr, fnr;
};

/// recall = TP / malware, fpr = FP / benign, fnr = FN / malware, F1 on the
/// malicious class. Undefined rates (empty denominators) are absent.
Rates rates(const Confusion& c, ErrorMode mode = ErrorMode::separate);

struct MonthlyMetrics {
  YearMonth month;
  Confusion counts;  // raw, before the error mode
  Rates rates;
  std::optional<double> fnr_seen_families;
  std::optional<double> fnr_new_families;
  std::optional<double> pct_new_family_malware;
  std::size_t seen_family_malware = 0;
  std::size_t new_family_malware = 0;
};

/// Families of malware in `training_month` are "seen". Samples without a
/// family are excluded from the split columns only.
std::vector<MonthlyMetrics> monthly_metrics(const std::vector<ScoredSample>& samples,
                                            const CorpusManifest& manifest,
                                            YearMonth training_month,
                                            ErrorMode mode = ErrorMode::separate);

/// Macro average over months (mean of each defined rate), or pooled counts.
Rates average(const std::vector<MonthlyMetrics>& months, ErrorMode mode = ErrorMode::separate,
              bool pooled = false);

struct ReportSizeStats {
  std::string sandbox;
  std::optional<double> median_tp_bytes;
  std::optional<double> median_fn_bytes;
  std::size_t tp = 0, fn = 0;
};

/// Median sanitized report size of true positives and false negatives per
/// sandbox, over malware only. Error predictions are skipped.
std::vector<ReportSizeStats> size_analysis(const std::vector<ScoredSample>& samples);

std::optional<double> median(std::vector<double> values);

struct MethodResult {
  std::string method;
  std::vector<MonthlyMetrics> months;
  Confusion total;
  std::vector<ReportSizeStats> sizes;
};

/// metrics.csv, confusion.csv, sizes.csv and summary.md under `dir`.
void write_reports(const std::filesystem::path& dir, const std::vector<MethodResult>& results,
                   ErrorMode mode, bool pooled);

}  // namespace trident::evaluation

#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace trident {

using json = nlohmann::json;

enum class Label { malicious, benign, unknown };

std::string_view to_string(Label label);
/// Accepts "malicious", "benign" and "unknown"; anything else is a DataError.
Label parse_label(std::string_view text);

struct Date {
  int year = 0;
  int month = 0;
  int day = 0;
};

/// Parses "YYYY-MM-DD" with an optional trailing time part ("T..." or " ...").
Date parse_iso_date(std::string_view text);

struct YearMonth {
  int year = 0;
  int month = 0;

  static YearMonth parse(std::string_view text);  // "YYYY-MM"
  std::string str() const;
  YearMonth next() const;
  auto operator<=>(const YearMonth&) const = default;
};

inline constexpr YearMonth kFirstBucket{2019, 9};
inline constexpr YearMonth kLastInRangeBucket{2020, 9};

/// Dates before the first bucket fold into it; everything else keeps its own
/// year-month (check is_out_of_range for buckets past the study window).
YearMonth bucket_month(const Date& first_seen);
bool is_out_of_range(YearMonth month);

/// Static-analysis fields stripped from every report.
std::span<const std::string_view> banned_report_keys();

/// Deep copy of `raw` with every banned key removed at any nesting depth.
json sanitize_report(const json& raw);

/// Parses report text; malformed input raises JsonParseError with the byte
/// offset of the failure.
json parse_report_text(std::string_view text);

/// Sorted keys, no whitespace. Used for on-disk reports, prompts and sizes.
std::string canonical_dump(const json& value);

/// The seven sandboxes accepted at ingest, case-exact.
const std::vector<std::string>& default_allowed_sandboxes();

struct BehaviorReport {
  std::string sample_id;
  std::string sandbox;
  YearMonth month;
  Label label = Label::unknown;
  std::optional<std::string> family;
  json document;
  std::size_t size_bytes = 0;
};

struct ManifestEntry {
  std::string sample_id;
  Label label = Label::unknown;
  std::optional<std::string> family;
  YearMonth month;
  std::string sandbox;
  std::string path;  // relative to the corpus root
  std::size_t size_bytes = 0;
  bool out_of_range = false;
};

class CorpusManifest {
 public:
  CorpusManifest() = default;
  explicit CorpusManifest(std::vector<ManifestEntry> entries);

  const std::vector<ManifestEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  const ManifestEntry* find(std::string_view sample_id) const;
  std::vector<YearMonth> months() const;
  std::map<std::pair<YearMonth, Label>, std::size_t> counts() const;

  static CorpusManifest load(const std::filesystem::path& corpus_root);
  void save(const std::filesystem::path& corpus_root) const;

 private:
  std::vector<ManifestEntry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct IngestOptions {
  std::vector<std::string> allowed_sandboxes = default_allowed_sandboxes();
  std::vector<std::string> excluded_sources = {"CAPA"};
};

struct IngestStats {
  std::size_t ingested = 0;
  std::size_t dropped_excluded_source = 0;
  std::size_t dropped_disallowed_sandbox = 0;
  std::size_t dropped_duplicate = 0;
  std::size_t unreadable = 0;
  std::size_t unlabeled = 0;
  std::size_t out_of_range = 0;

  json to_json() const;
};

struct IngestResult {
  CorpusManifest manifest;
  IngestStats stats;
};

/// Sanitizes every `*.json` under `raw_dir` (file stem = sample_id) and writes
/// the write-once corpus under `corpus_root`: <month>/<sample_id>.json plus
/// manifest.csv. Labels come from the sidecar CSV (sample_id, label, family,
/// first_seen, sandbox).
IngestResult ingest(const std::filesystem::path& raw_dir,
                    const std::filesystem::path& labels_csv,
                    const std::filesystem::path& corpus_root,
                    const IngestOptions& options = {});

/// Read-only view over an ingested corpus.
class Corpus {
 public:
  explicit Corpus(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  const CorpusManifest& manifest() const noexcept { return manifest_; }

  BehaviorReport load(const ManifestEntry& entry) const;
  std::vector<BehaviorReport> load_month(YearMonth month) const;
  std::vector<BehaviorReport> load_all() const;

 private:
  std::filesystem::path root_;
  CorpusManifest manifest_;
};

}  // namespace trident

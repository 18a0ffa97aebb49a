#include "trident/report_store.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "trident/csv.hpp"
#include "trident/errors.hpp"

namespace trident {
namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 9> kBannedKeys = {
    "signature_matches", "mbc",        "mitre_attack_techniques",
    "tags",              "verdicts",   "verdict_confidence",
    "sigma_analysis_results", "ids_alerts", "verdict_labels"};

bool is_banned(std::string_view key) {
  return std::find(kBannedKeys.begin(), kBannedKeys.end(), key) !=
         kBannedKeys.end();
}

int parse_int(std::string_view text, std::string_view what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError("invalid " + std::string(what) + ": '" + std::string(text) + "'");
  }
  return value;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

// Sandbox name recorded inside a VirusTotal-style report, if any.
std::string embedded_sandbox(const json& doc) {
  if (!doc.is_object()) return {};
  if (auto it = doc.find("sandbox_name"); it != doc.end() && it->is_string()) {
    return it->get<std::string>();
  }
  auto data = doc.find("data");
  if (data == doc.end()) return {};
  auto probe = [](const json& entry) -> std::string {
    if (!entry.is_object()) return {};
    auto attrs = entry.find("attributes");
    if (attrs == entry.end() || !attrs->is_object()) return {};
    auto name = attrs->find("sandbox_name");
    if (name == attrs->end() || !name->is_string()) return {};
    return name->get<std::string>();
  };
  if (data->is_array()) {
    for (const auto& entry : *data) {
      if (auto s = probe(entry); !s.empty()) return s;
    }
    return {};
  }
  return probe(*data);
}

}  // namespace

std::string_view to_string(Label label) {
  switch (label) {
    case Label::malicious:
      return "malicious";
    case Label::benign:
      return "benign";
    case Label::unknown:
      return "unknown";
  }
  return "unknown";
}

Label parse_label(std::string_view text) {
  if (text == "malicious") return Label::malicious;
  if (text == "benign") return Label::benign;
  if (text == "unknown" || text.empty()) return Label::unknown;
  throw DataError("invalid label '" + std::string(text) + "'");
}

Date parse_iso_date(std::string_view text) {
  auto cut = text.find_first_of("T ");
  if (cut != std::string_view::npos) text = text.substr(0, cut);
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw DataError("invalid date '" + std::string(text) + "'");
  }
  Date d{parse_int(text.substr(0, 4), "year"), parse_int(text.substr(5, 2), "month"),
         parse_int(text.substr(8, 2), "day")};
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) {
    throw DataError("invalid date '" + std::string(text) + "'");
  }
  return d;
}

YearMonth YearMonth::parse(std::string_view text) {
  if (text.size() != 7 || text[4] != '-') {
    throw DataError("invalid month bucket '" + std::string(text) + "'");
  }
  YearMonth ym{parse_int(text.substr(0, 4), "year"), parse_int(text.substr(5, 2), "month")};
  if (ym.month < 1 || ym.month > 12) {
    throw DataError("invalid month bucket '" + std::string(text) + "'");
  }
  return ym;
}

std::string YearMonth::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
  return buf;
}

YearMonth YearMonth::next() const {
  return month == 12 ? YearMonth{year + 1, 1} : YearMonth{year, month + 1};
}

YearMonth bucket_month(const Date& first_seen) {
  YearMonth ym{first_seen.year, first_seen.month};
  return ym < kFirstBucket ? kFirstBucket : ym;
}

bool is_out_of_range(YearMonth month) { return month > kLastInRangeBucket; }

std::span<const std::string_view> banned_report_keys() { return kBannedKeys; }

json sanitize_report(const json& raw) {
  switch (raw.type()) {
    case json::value_t::object: {
      json out = json::object();
      for (auto it = raw.begin(); it != raw.end(); ++it) {
        if (is_banned(it.key())) continue;
        out[it.key()] = sanitize_report(it.value());
      }
      return out;
    }
    case json::value_t::array: {
      json out = json::array();
      for (const auto& item : raw) out.push_back(sanitize_report(item));
      return out;
    }
    default:
      return raw;
  }
}

json parse_report_text(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw JsonParseError(e.what(), e.byte);
  }
}

std::string canonical_dump(const json& value) {
  // nlohmann's default object type is an ordered std::map, so dump() emits
  // keys sorted; the error handler keeps invalid UTF-8 from aborting.
  return value.dump(-1, ' ', false, json::error_handler_t::replace);
}

const std::vector<std::string>& default_allowed_sandboxes() {
  static const std::vector<std::string> kAllowed = {
      "VirusTotal Cuckoofork", "Tencent HABO",       "Zenbox",
      "CAPE Sandbox",          "Rising MOVES",       "VirusTotal Jujubox",
      "Microsoft Sysinternals"};
  return kAllowed;
}

// ---------------------------------------------------------------------------
// CorpusManifest

CorpusManifest::CorpusManifest(std::vector<ManifestEntry> entries)
    : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto [it, inserted] = index_.emplace(entries_[i].sample_id, i);
    if (!inserted) {
      throw DataError("duplicate sample_id in manifest: " + entries_[i].sample_id);
    }
  }
}

const ManifestEntry* CorpusManifest::find(std::string_view sample_id) const {
  auto it = index_.find(sample_id);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

std::vector<YearMonth> CorpusManifest::months() const {
  std::set<YearMonth> seen;
  for (const auto& e : entries_) seen.insert(e.month);
  return {seen.begin(), seen.end()};
}

std::map<std::pair<YearMonth, Label>, std::size_t> CorpusManifest::counts() const {
  std::map<std::pair<YearMonth, Label>, std::size_t> out;
  for (const auto& e : entries_) ++out[{e.month, e.label}];
  return out;
}

CorpusManifest CorpusManifest::load(const fs::path& corpus_root) {
  std::vector<ManifestEntry> entries;
  for (const auto& row : csv::read_file(corpus_root / "manifest.csv")) {
    ManifestEntry e;
    e.sample_id = row.at("sample_id");
    e.label = parse_label(row.at("label"));
    if (const auto& fam = row.at("family"); !fam.empty()) e.family = fam;
    e.month = YearMonth::parse(row.at("month"));
    e.sandbox = row.at("sandbox");
    e.path = row.at("path");
    e.size_bytes = static_cast<std::size_t>(std::stoull(row.at("size_bytes")));
    e.out_of_range = row.at("out_of_range") == "1";
    entries.push_back(std::move(e));
  }
  return CorpusManifest(std::move(entries));
}

void CorpusManifest::save(const fs::path& corpus_root) const {
  std::ofstream out(corpus_root / "manifest.csv", std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write manifest under " + corpus_root.string());
  csv::write_row(out, {"sample_id", "label", "family", "month", "sandbox", "path",
                       "size_bytes", "out_of_range"});
  for (const auto& e : entries_) {
    csv::write_row(out, {e.sample_id, std::string(to_string(e.label)),
                         e.family.value_or(""), e.month.str(), e.sandbox, e.path,
                         std::to_string(e.size_bytes), e.out_of_range ? "1" : "0"});
  }
}

// ---------------------------------------------------------------------------
// Ingest

json IngestStats::to_json() const {
  return {{"ingested", ingested},
          {"dropped_excluded_source", dropped_excluded_source},
          {"dropped_disallowed_sandbox", dropped_disallowed_sandbox},
          {"dropped_duplicate", dropped_duplicate},
          {"unreadable", unreadable},
          {"unlabeled", unlabeled},
          {"out_of_range", out_of_range}};
}

IngestResult ingest(const fs::path& raw_dir, const fs::path& labels_csv,
                    const fs::path& corpus_root, const IngestOptions& options) {
  if (!fs::is_directory(raw_dir)) {
    throw DataError("raw report directory not found: " + raw_dir.string());
  }
  if (fs::exists(corpus_root / "manifest.csv")) {
    throw DataError("corpus already ingested (write-once): " + corpus_root.string());
  }

  struct LabelRow {
    Label label;
    std::optional<std::string> family;
    Date first_seen;
    std::string sandbox;
  };
  std::map<std::string, LabelRow, std::less<>> labels;
  for (const auto& row : csv::read_file(labels_csv)) {
    LabelRow lr;
    lr.label = parse_label(row.at("label"));
    if (const auto& fam = row.at("family"); !fam.empty()) lr.family = fam;
    lr.first_seen = parse_iso_date(row.at("first_seen"));
    lr.sandbox = row.at("sandbox");
    labels.emplace(row.at("sample_id"), std::move(lr));
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(raw_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  auto contains = [](const std::vector<std::string>& list, std::string_view s) {
    return std::find(list.begin(), list.end(), s) != list.end();
  };

  IngestResult result;
  std::vector<ManifestEntry> entries;
  std::set<std::string, std::less<>> seen_ids;
  fs::create_directories(corpus_root);

  for (const auto& path : files) {
    const std::string sample_id = path.stem().string();
    json raw;
    try {
      raw = parse_report_text(read_file(path));
    } catch (const DataError&) {
      ++result.stats.unreadable;
      continue;
    }
    if (!raw.is_object()) {
      ++result.stats.unreadable;
      continue;
    }

    ManifestEntry e;
    e.sample_id = sample_id;
    auto label_it = labels.find(sample_id);
    if (label_it != labels.end()) {
      e.label = label_it->second.label;
      e.family = label_it->second.family;
      e.month = bucket_month(label_it->second.first_seen);
      e.sandbox = label_it->second.sandbox;
    } else {
      ++result.stats.unlabeled;
      e.label = Label::unknown;
      e.month = kFirstBucket;
      e.sandbox = embedded_sandbox(raw);
    }

    if (contains(options.excluded_sources, e.sandbox)) {
      ++result.stats.dropped_excluded_source;
      continue;
    }
    if (!contains(options.allowed_sandboxes, e.sandbox)) {
      ++result.stats.dropped_disallowed_sandbox;
      continue;
    }
    if (!seen_ids.insert(sample_id).second) {
      ++result.stats.dropped_duplicate;
      continue;
    }

    const std::string body = canonical_dump(sanitize_report(raw));
    e.size_bytes = body.size();
    e.out_of_range = is_out_of_range(e.month);
    if (e.out_of_range) ++result.stats.out_of_range;
    e.path = e.month.str() + "/" + sample_id + ".json";
    fs::create_directories(corpus_root / e.month.str());
    write_file(corpus_root / e.path, body);
    entries.push_back(std::move(e));
    ++result.stats.ingested;
  }

  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.month, a.sample_id) < std::tie(b.month, b.sample_id);
  });
  result.manifest = CorpusManifest(std::move(entries));
  result.manifest.save(corpus_root);
  return result;
}

// ---------------------------------------------------------------------------
// Corpus

Corpus::Corpus(fs::path root) : root_(std::move(root)), manifest_(CorpusManifest::load(root_)) {}

BehaviorReport Corpus::load(const ManifestEntry& entry) const {
  BehaviorReport r;
  r.sample_id = entry.sample_id;
  r.sandbox = entry.sandbox;
  r.month = entry.month;
  r.label = entry.label;
  r.family = entry.family;
  const std::string text = read_file(root_ / entry.path);
  r.document = parse_report_text(text);
  r.size_bytes = text.size();
  return r;
}

std::vector<BehaviorReport> Corpus::load_month(YearMonth month) const {
  std::vector<BehaviorReport> out;
  for (const auto& e : manifest_.entries()) {
    if (e.month == month) out.push_back(load(e));
  }
  return out;
}

std::vector<BehaviorReport> Corpus::load_all() const {
  std::vector<BehaviorReport> out;
  out.reserve(manifest_.size());
  for (const auto& e : manifest_.entries()) out.push_back(load(e));
  return out;
}

}  // namespace trident

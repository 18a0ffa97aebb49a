#include "trident/synth_corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "trident/csv.hpp"
#include "trident/errors.hpp"
#include "trident/filter.hpp"
#include "trident/hashing.hpp"
#include "trident/llm_gateway.hpp"

namespace trident::synth {

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi <= lo) return lo;
  auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(next() % span);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::string Rng::lower_word(int min_len, int max_len) {
  auto len = uniform_int(min_len, max_len);
  std::string s;
  for (std::int64_t i = 0; i < len; ++i) s += static_cast<char>('a' + uniform_int(0, 25));
  return s;
}

std::string Rng::hex(int len) {
  static const char kDigits[] = "0123456789abcdef";
  std::string s;
  for (int i = 0; i < len; ++i) s += kDigits[uniform_int(0, 15)];
  return s;
}

namespace {

std::vector<std::string> name_variants(const std::string& id) {
  return {"rule_" + id, id, "rule_" + id + "_1", "rule_" + id + "_2", "detect_" + id, id + "_v2"};
}

std::vector<Behavior> make_behaviors() {
  auto b = [](std::string id, std::string description, std::string body) {
    auto names = name_variants(id);
    return Behavior{std::move(id), std::move(description), std::move(body), std::move(names)};
  };
  return {
      b("c2_known_ip", "Detect C2 Server Communication",
        R"([.data[]?.attributes?.ip_traffic[]? | select(.destination_ip == "88.198.101.58") | {matched: true, ip: .destination_ip, port: .destination_port, protocol: .transport_layer_protocol}])"),
      b("run_key_persistence", "Registry Run key persistence",
        R"([.data[]?.attributes?.registry_keys_set[]? | select(.key | test("\\\\CurrentVersion\\\\Run\\\\"; "i")) | {matched: true, key: .key, value: .value}])"),
      b("shadow_copy_deletion", "Volume shadow copy deletion",
        R"([.data[]?.attributes?.command_executions[]? | select(ascii_downcase | test("vssadmin(\\.exe)? delete shadows|shadowcopy delete")) | {matched: true, command: .}])"),
      b("temp_exe_drop", "Executable with random name dropped in Temp",
        R"([.data[]?.attributes?.files_dropped[]? | select(.path | test("\\\\Temp\\\\[a-z]{5,10}\\.exe$"; "i")) | {matched: true, path: .path}])"),
      b("process_injection", "Code injected into another process",
        R"([.data[]?.attributes?.processes_injected[]? | strings | select(endswith(".exe")) | {matched: true, target: .}])"),
      b("mutex_marker", "Known malware mutex",
        R"([.data[]?.attributes?.mutexes_created[]? | select(startswith("Global\\zx")) | {matched: true, mutex: .}])"),
      b("dns_dga", "Lookups of algorithmically generated domains",
        R"([.data[]?.attributes?.dns_lookups[]? | select(.hostname | test("^[a-z]{10,16}\\.(top|xyz)$")) | {matched: true, hostname: .hostname}])"),
      b("disable_defender", "Windows Defender disabled through policy",
        R"([.data[]?.attributes?.registry_keys_set[]? | select((.key | contains("Windows Defender")) and .value == "1") | {matched: true, key: .key}])"),
      b("keylogger_hook", "Keyboard hook or key state polling",
        R"([.data[]?.attributes?.calls_highlighted[]? | select(. == "SetWindowsHookExA" or . == "GetAsyncKeyState") | {matched: true, api: .}])"),
      b("startup_folder_drop", "File written to the Startup folder",
        R"([.data[]?.attributes?.files_written[]? | select(test("\\\\Start Menu\\\\Programs\\\\Startup\\\\"; "i")) | {matched: true, path: .}])"),
  };
}

const std::vector<std::string> kUsers = {"admin", "user", "John", "analyst", "Peter"};
const std::vector<std::string> kApps = {"Mozilla", "Adobe", "Notepad++", "7-Zip", "VideoLAN",
                                        "Zoom", "Python39"};
const std::vector<std::string> kSandboxes = default_allowed_sandboxes();

void insert_random(Rng& rng, json& list, json value) {
  auto pos = rng.index(list.size() + 1);
  list.insert(list.begin() + static_cast<std::ptrdiff_t>(pos), std::move(value));
}

json& list_in(json& attrs, const char* key) {
  if (!attrs.contains(key)) attrs[key] = json::array();
  return attrs[key];
}

json benign_attributes(Rng& rng) {
  json a = json::object();
  const auto& user = rng.pick(kUsers);
  const auto& app = rng.pick(kApps);

  json tree = json::array();
  auto roots = rng.uniform_int(1, 2);
  for (std::int64_t i = 0; i < roots; ++i) {
    json children = json::array();
    auto kids = rng.uniform_int(0, 3);
    for (std::int64_t k = 0; k < kids; ++k) {
      children.push_back({{"name", rng.pick(std::vector<std::string>{"conhost.exe", "svchost.exe",
                                                                      "werfault.exe", "msiexec.exe"})},
                          {"process_id", std::to_string(rng.uniform_int(1000, 9000))}});
    }
    tree.push_back({{"name", rng.lower_word(4, 9) + ".exe"},
                    {"process_id", std::to_string(rng.uniform_int(1000, 9000))},
                    {"children", children}});
  }
  a["processes_tree"] = tree;

  auto pick_some = [&](const char* key, const std::vector<json>& pool, int lo, int hi) {
    json& list = list_in(a, key);
    auto n = rng.uniform_int(lo, hi);
    for (std::int64_t i = 0; i < n; ++i) list.push_back(pool[rng.index(pool.size())]);
  };

  pick_some("registry_keys_set",
            {json{{"key", "HKLM\\SOFTWARE\\Microsoft\\Cryptography\\RNG\\Seed"}, {"value", rng.hex(16)}},
             json{{"key", "HKCU\\Software\\Microsoft\\Windows\\CurrentVersion\\Explorer\\Shell Folders\\AppData"},
                  {"value", "C:\\Users\\" + user + "\\AppData\\Roaming"}},
             json{{"key", "HKLM\\System\\CurrentControlSet\\Services\\Tcpip\\Parameters\\Hostname"},
                  {"value", "DESKTOP-" + rng.hex(6)}},
             json{{"key", "HKCU\\Software\\" + app + "\\Settings\\LastRun"}, {"value", std::to_string(rng.uniform_int(1, 99999))}}},
            0, 3);
  pick_some("command_executions",
            {json("C:\\Windows\\system32\\cmd.exe /c ver"),
             json("\"C:\\Program Files\\" + app + "\\" + rng.lower_word(3, 8) + ".exe\" --update"),
             json("schtasks.exe /query /fo csv"), json("C:\\Windows\\System32\\wbem\\WmiPrvSE.exe"),
             json("rundll32.exe shell32.dll,Control_RunDLL")},
            0, 2);
  pick_some("files_dropped",
            {json{{"path", "C:\\Users\\" + user + "\\AppData\\Local\\Temp\\~DF" + rng.hex(4) + ".tmp"}},
             json{{"path", "C:\\Program Files\\" + app + "\\update.exe"}},
             json{{"path", "C:\\ProgramData\\" + app + "\\cache.dat"}}},
            0, 2);
  pick_some("files_written",
            {json("C:\\Users\\" + user + "\\AppData\\Local\\" + app + "\\settings.ini"),
             json("C:\\ProgramData\\" + app + "\\log.txt"),
             json("C:\\Users\\" + user + "\\Documents\\report.docx")},
            0, 3);
  pick_some("dns_lookups",
            {json{{"hostname", "www.microsoft.com"}}, json{{"hostname", "ctldl.windowsupdate.com"}},
             json{{"hostname", "dns.msftncsi.com"}}, json{{"hostname", "ocsp.digicert.com"}},
             json{{"hostname", "www.google.com"}}},
            0, 3);
  pick_some("ip_traffic",
            {json{{"destination_ip", "13.107.4.50"}, {"destination_port", 443}, {"transport_layer_protocol", "TCP"}},
             json{{"destination_ip", "8.8.8.8"}, {"destination_port", 53}, {"transport_layer_protocol", "UDP"}},
             json{{"destination_ip", "23.50.12.4"}, {"destination_port", 80}, {"transport_layer_protocol", "TCP"}}},
            0, 3);
  pick_some("calls_highlighted",
            {json("GetTickCount"), json("LoadLibraryA"), json("GetSystemTimeAsFileTime"),
             json("CreateFileW")},
            0, 3);
  if (rng.chance(0.6)) {
    pick_some("mutexes_created",
              {json("Local\\ZonesCacheCounterMutex"), json("Global\\MsWinZonesCacheCounterMutexA0"),
               json("Local\\SM0:" + std::to_string(rng.uniform_int(100, 9999)) + ":168:WilStaging_02")},
              1, 2);
  }
  // Empty lists are dropped to vary the shape of reports.
  for (auto it = a.begin(); it != a.end();) {
    if (it->is_array() && it->empty()) {
      it = a.erase(it);
    } else {
      ++it;
    }
  }
  return a;
}

void embed(Rng& rng, json& attrs, const std::string& id) {
  const auto& user = rng.pick(kUsers);
  if (id == "c2_known_ip") {
    insert_random(rng, list_in(attrs, "ip_traffic"),
                  {{"destination_ip", "88.198.101.58"},
                   {"destination_port", rng.pick(std::vector<int>{443, 8080, 4444})},
                   {"transport_layer_protocol", "TCP"}});
  } else if (id == "run_key_persistence") {
    auto name = rng.lower_word(4, 8);
    insert_random(rng, list_in(attrs, "registry_keys_set"),
                  {{"key", "HKCU\\Software\\Microsoft\\Windows\\CurrentVersion\\Run\\" + name},
                   {"value", "C:\\Users\\" + user + "\\AppData\\Roaming\\" + name + ".exe"}});
  } else if (id == "shadow_copy_deletion") {
    insert_random(rng, list_in(attrs, "command_executions"),
                  rng.pick(std::vector<std::string>{"vssadmin.exe Delete Shadows /All /Quiet",
                                                    "vssadmin delete shadows /all",
                                                    "wmic shadowcopy delete"}));
  } else if (id == "temp_exe_drop") {
    insert_random(rng, list_in(attrs, "files_dropped"),
                  {{"path", "C:\\Users\\" + user + "\\AppData\\Local\\Temp\\" + rng.lower_word(5, 10) + ".exe"}});
  } else if (id == "process_injection") {
    insert_random(rng, list_in(attrs, "processes_injected"),
                  rng.pick(std::vector<std::string>{"C:\\Windows\\explorer.exe",
                                                    "C:\\Windows\\System32\\svchost.exe",
                                                    "C:\\Windows\\System32\\notepad.exe"}));
  } else if (id == "mutex_marker") {
    insert_random(rng, list_in(attrs, "mutexes_created"), "Global\\zx" + rng.hex(6));
  } else if (id == "dns_dga") {
    insert_random(rng, list_in(attrs, "dns_lookups"),
                  {{"hostname", rng.lower_word(10, 16) + rng.pick(std::vector<std::string>{".top", ".xyz"})}});
  } else if (id == "disable_defender") {
    insert_random(rng, list_in(attrs, "registry_keys_set"),
                  {{"key", "HKLM\\SOFTWARE\\Policies\\Microsoft\\Windows Defender\\DisableAntiSpyware"},
                   {"value", "1"}});
  } else if (id == "keylogger_hook") {
    insert_random(rng, list_in(attrs, "calls_highlighted"),
                  rng.pick(std::vector<std::string>{"SetWindowsHookExA", "GetAsyncKeyState"}));
  } else if (id == "startup_folder_drop") {
    insert_random(rng, list_in(attrs, "files_written"),
                  "C:\\Users\\" + user + "\\AppData\\Roaming\\Microsoft\\Windows\\Start Menu\\Programs\\Startup\\" +
                      rng.lower_word(4, 8) + rng.pick(std::vector<std::string>{".exe", ".lnk"}));
  } else {
    throw std::invalid_argument("unknown behavior " + id);
  }
}

// Static-analysis fields that raw reports carry and ingest removes.
void add_banned_fields(Rng& rng, json& doc, bool malicious) {
  auto& attrs = doc["data"][0]["attributes"];
  attrs["tags"] = json::array({"DIRECT_CPU_CLOCK_ACCESS", "RUNTIME_MODULES"});
  attrs["verdicts"] = malicious ? json::array({"MALWARE"}) : json::array();
  attrs["verdict_confidence"] = rng.uniform_int(1, 100);
  attrs["mitre_attack_techniques"] = json::array({{{"id", "T1082"}, {"signature_description", "Queries system information"}}});
  attrs["signature_matches"] = json::array({{{"name", "generic"}, {"rule_src", "sigma"}}});
  if (rng.chance(0.5)) attrs["sigma_analysis_results"] = json::array({{{"rule_level", "low"}}});
  if (rng.chance(0.3)) attrs["ids_alerts"] = json::array({{{"rule_msg", "ET POLICY"}}});
  if (rng.chance(0.3)) attrs["mbc"] = json::array({{{"id", "B0001"}}});
  if (rng.chance(0.3)) doc["verdict_labels"] = json::array({"trojan"});
}

struct Family {
  std::string name;
  std::vector<std::string> signature;
};

const std::vector<std::string> kFamilyNames = {
    "fynloski", "wacatac", "upatre", "sfone",   "berbew",   "dinwod",  "mira",     "benjamin",
    "ganelp",   "musecador", "gepys", "vobfus", "sillyp2p", "tinba",   "lunam",    "zegost",
    "autorun",  "bladabindi", "emotet", "trickbot", "qakbot", "ursnif", "lokibot", "remcos"};

std::string fmt_prob(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", p);
  return buf;
}

std::string verdict_reply(Rng& rng, bool malicious, const std::vector<std::string>& behavior_ids) {
  std::string text;
  if (malicious) {
    text = rng.pick(std::vector<std::string>{"Verdict: True\n\n", "**Verdict:** True\n\n", "True.\n\n"});
    text += "The report shows indicators of malicious intent:";
    for (const auto& id : behavior_ids) text += "\n- " + behavior(id).description;
    if (behavior_ids.empty()) text += "\n- evasive, sparse activity typical of packed malware";
  } else {
    text = rng.pick(std::vector<std::string>{"Verdict: False\n\n", "**Verdict:** False\n\n", "False. "});
    text += "The observed activity (settings reads, update checks, routine DNS lookups) is consistent "
            "with legitimate software.";
  }
  return text;
}

std::string rules_reply(Rng& rng, const json& rules) {
  json payload = {{"rules", rules}};
  switch (rng.uniform_int(0, 3)) {
    case 0:
      return payload.dump();
    case 1:
      return "```json\n" + payload.dump(2) + "\n```";
    case 2:
      return "Here are the detection rules for the key behaviors.\n\n" + payload.dump(2) +
             "\n\nEach rule returns an empty array when the behavior is absent.";
    default: {
      // Raw newlines inside strings and a trailing comma, as models often emit.
      std::string out = "{\n  \"rules\": [\n";
      for (std::size_t i = 0; i < rules.size(); ++i) {
        const auto& r = rules[i];
        std::string src = r["rule"].get<std::string>();
        std::string escaped = json(src).dump();
        escaped = escaped.substr(1, escaped.size() - 2);
        std::size_t pos = 0;
        while ((pos = escaped.find(" | ", pos)) != std::string::npos) {
          escaped.replace(pos, 3, "\n    | ");
          pos += 7;
        }
        out += "    {\n      \"name\": " + json(r["name"]).dump() + ",\n      \"description\": " +
               json(r["description"]).dump() + ",\n      \"rule\": \"" + escaped + "\",\n    }";
        out += i + 1 < rules.size() ? ",\n" : "\n";
      }
      out += "  ]\n}";
      return out;
    }
  }
}

}  // namespace

const std::vector<Behavior>& behaviors() {
  static const std::vector<Behavior> kBehaviors = make_behaviors();
  return kBehaviors;
}

const Behavior& behavior(std::string_view id) {
  for (const auto& b : behaviors()) {
    if (b.id == id) return b;
  }
  throw std::invalid_argument("unknown behavior " + std::string(id));
}

std::string rule_source(const Behavior& b, std::string_view name) {
  return "def " + std::string(name) + ": " + b.rule_body + ";";
}

std::string proxy_rule_source() {
  return R"(def rule_proxy_settings_changed: [.data[]?.attributes?.registry_keys_set[]? | select(.key | test("Internet Settings\\\\Proxy")) | {matched: true, key: .key}];)";
}

std::string unsupported_rule_source() {
  return R"(def rule_recent_files: [limit(3; .data[]?.attributes?.files_written[]?)];)";
}

std::string error_prone_rule_source() {
  return R"(def rule_global_mutex_marker: [.data[0].attributes.mutexes_created[] | select(startswith("Global\\zx"))];)";
}

std::string wrong_ip_rule_source() {
  return R"(def rule_c2_backup_ip: [.data[]?.attributes?.ip_traffic[]? | select(.destination_ip == "88.198.101.59")];)";
}

json make_document(std::uint64_t seed, const std::vector<std::string>& behavior_ids,
                   bool proxy_setting) {
  Rng rng(seed);
  json data = json::array();
  auto entries = rng.uniform_int(1, 3);
  for (std::int64_t i = 0; i < entries; ++i) {
    data.push_back({{"type", "file_behaviour"}, {"id", rng.hex(16)}, {"attributes", benign_attributes(rng)}});
  }
  for (const auto& id : behavior_ids) embed(rng, data[rng.index(data.size())]["attributes"], id);
  if (proxy_setting) {
    insert_random(rng, list_in(data[rng.index(data.size())]["attributes"], "registry_keys_set"),
                  {{"key", "HKCU\\Software\\Microsoft\\Windows\\CurrentVersion\\Internet Settings\\ProxyEnable"},
                   {"value", rng.pick(std::vector<std::string>{"0", "1"})}});
  }
  return {{"data", data}, {"meta", {{"count", data.size()}}}};
}

json SynthSummary::to_json() const {
  return {{"labeled_reports", labeled_reports}, {"malware", malware},
          {"benign", benign},                   {"unlabeled", unlabeled},
          {"excluded_source", excluded_source}, {"cache_entries", cache_entries},
          {"reference_rules", reference_rules}};
}

SynthSummary generate(const SynthOptions& options, const std::filesystem::path& out_dir) {
  if (options.months < 1) throw ConfigError("synth.months", "must be at least 1");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "raw");
  Rng rng(options.seed);

  // Families: month one draws from the initial set; later months add new ones.
  std::vector<Family> families;
  auto make_family = [&](std::size_t k) {
    Family f;
    f.name = k < kFamilyNames.size() ? kFamilyNames[k] : "family" + std::to_string(k);
    std::vector<std::string> ids;
    for (const auto& b : behaviors()) ids.push_back(b.id);
    rng.shuffle(ids);
    f.signature.assign(ids.begin(), ids.begin() + 3);
    families.push_back(f);
  };
  for (std::size_t k = 0; k < options.initial_families; ++k) make_family(k);

  struct Sample {
    std::string id;
    YearMonth month;
    Date first_seen;
    Label label;
    std::string family;
    std::string sandbox;
    std::vector<std::string> behaviors;
    json document;  // sanitized form
    double gbdt;
    bool labeled = true;
  };
  std::vector<Sample> samples;

  auto record = [&](const std::string& prompt, const std::string& reply,
                    std::optional<std::string> finish_reason = std::nullopt) {
    llm::CacheEntry e;
    e.prompt = prompt;
    e.prompt_sha256 = sha256_hex(prompt);
    e.reply = reply;
    e.provider = "synthetic";
    e.model = "synthetic-oracle";
    e.timestamp = "1970-01-01T00:00:00Z";
    e.finish_reason = std::move(finish_reason);
    return e;
  };
  std::vector<llm::CacheEntry> entries;

  std::vector<std::string> compiled_ids;
  std::vector<filter::FilterAst> reference;
  for (const auto& b : behaviors()) {
    compiled_ids.push_back(b.id);
    reference.push_back(filter::parse_filter(rule_source(b, b.names.front())));
  }
  auto check_reference = [&](const Sample& s) {
    for (std::size_t i = 0; i < reference.size(); ++i) {
      bool embedded = std::count(s.behaviors.begin(), s.behaviors.end(), compiled_ids[i]) > 0;
      auto m = filter::rule_matches(filter::evaluate(reference[i], s.document));
      if ((m == filter::MatchResult::match) != embedded) {
        throw std::logic_error("reference rule " + compiled_ids[i] + " disagrees with sample " + s.id);
      }
    }
  };

  std::size_t first_new = options.initial_families;
  YearMonth month = options.start;
  for (int mi = 0; mi < options.months; ++mi, month = month.next()) {
    if (mi > 0) {
      for (std::size_t k = 0; k < options.new_families_per_month; ++k) make_family(families.size());
    }
    auto make_date = [&](bool allow_early) {
      if (allow_early && rng.chance(0.1)) {
        return Date{2019, static_cast<int>(rng.uniform_int(1, 8)), static_cast<int>(rng.uniform_int(1, 28))};
      }
      return Date{month.year, month.month, static_cast<int>(rng.uniform_int(1, 28))};
    };
    const std::size_t total = options.malware_per_month + options.benign_per_month;
    for (std::size_t i = 0; i < total; ++i) {
      Sample s;
      s.label = i < options.malware_per_month ? Label::malicious : Label::benign;
      s.id = sha256_hex("synth:" + std::to_string(options.seed) + ":" + month.str() + ":" + std::to_string(i));
      s.month = month;
      s.first_seen = make_date(mi == 0);
      s.sandbox = rng.pick(kSandboxes);
      bool proxy = rng.chance(options.proxy_rate);
      if (s.label == Label::malicious) {
        bool is_new = mi > 0 && rng.chance(options.new_family_share);
        std::size_t fam = is_new ? first_new + rng.index(families.size() - first_new)
                                 : rng.index(options.initial_families);
        const auto& family = families[fam];
        if (!rng.chance(0.05)) s.family = family.name;
        auto k = rng.uniform_int(1, 4);
        std::vector<std::string> pool = family.signature;
        rng.shuffle(pool);
        s.behaviors.push_back(pool.front());
        while (static_cast<std::int64_t>(s.behaviors.size()) < k) {
          const auto& extra = rng.chance(0.6) ? rng.pick(pool) : rng.pick(behaviors()).id;
          if (std::count(s.behaviors.begin(), s.behaviors.end(), extra) == 0) s.behaviors.push_back(extra);
        }
        std::sort(s.behaviors.begin(), s.behaviors.end());
        if (is_new) {
          s.gbdt = rng.chance(0.9) ? rng.uniform(0.5, 0.98) : rng.uniform(0.985, 1.0);
        } else {
          s.gbdt = rng.chance(0.95) ? rng.uniform(0.985, 1.0) : rng.uniform(0.6, 0.98);
        }
      } else {
        s.gbdt = rng.chance(0.01) ? rng.uniform(0.985, 1.0) : rng.uniform(0.0, 0.3);
      }
      json doc = make_document(rng.next(), s.behaviors, proxy);
      for (auto& entry : doc["data"]) entry["attributes"]["sandbox_name"] = s.sandbox;
      s.document = doc;
      check_reference(s);
      samples.push_back(std::move(s));
    }
  }

  // Verdict replies for every labeled sample.
  for (const auto& s : samples) {
    auto prompt = llm::render_verdict_prompt(s.document);
    if (rng.chance(options.llm_error_rate)) {
      entries.push_back(record(prompt, "", "PROHIBITED_CONTENT"));
    } else {
      entries.push_back(record(prompt, verdict_reply(rng, s.label == Label::malicious, s.behaviors)));
    }
  }

  // Rule-generation replies for month-one malware, with planted bad rules.
  std::map<std::string, std::string> reference_origin;
  const auto proxy_ast = filter::parse_filter(proxy_rule_source());
  const auto error_ast = filter::parse_filter(error_prone_rule_source());
  std::size_t nth = 0;
  for (const auto& s : samples) {
    if (s.month != options.start || s.label != Label::malicious) continue;
    ++nth;
    auto prompt = llm::render_rules_prompt(s.document);
    if (nth % 60 == 0) {
      // Unparseable twice: the sample yields no rules.
      entries.push_back(record(prompt, "I could not analyze this report in the requested format."));
      entries.push_back(record(prompt + llm::reprompt_suffix(), "Unable to comply."));
      continue;
    }
    if (nth % 45 == 0) {
      entries.push_back(record(prompt, R"({"rules": []})"));
      continue;
    }
    json rules = json::array();
    for (const auto& id : s.behaviors) {
      if (!rng.chance(0.85)) continue;
      const auto& b = behavior(id);
      const auto& name = rng.pick(b.names);
      rules.push_back({{"name", name}, {"description", b.description}, {"rule", rule_source(b, name)}});
      reference_origin.try_emplace(id, s.id);
    }
    auto plant = [&](const std::string& name, const std::string& desc, const std::string& src) {
      rules.push_back({{"name", name}, {"description", desc}, {"rule", src}});
    };
    if (nth % 7 == 0 &&
        filter::rule_matches(filter::evaluate(proxy_ast, s.document)) == filter::MatchResult::match) {
      plant("rule_proxy_settings_changed", "Proxy settings modified", proxy_rule_source());
    }
    if (nth % 25 == 0) plant("rule_recent_files", "Recently written files", unsupported_rule_source());
    if (filter::rule_matches(filter::evaluate(error_ast, s.document)) == filter::MatchResult::match &&
        nth % 3 == 0) {
      plant("rule_global_mutex_marker", "Global mutex marker", error_prone_rule_source());
    }
    if (std::count(s.behaviors.begin(), s.behaviors.end(), "c2_known_ip") && nth % 5 == 0) {
      plant("rule_c2_backup_ip", "Backup C2 address", wrong_ip_rule_source());
    }
    entries.push_back(record(prompt, rules_reply(rng, rules)));
  }

  // Ingest noise: excluded sources and unlabeled samples.
  SynthSummary summary;
  struct Extra {
    std::string id;
    std::string sandbox;
    bool labeled;
    json document;
  };
  std::vector<Extra> extras;
  if (options.include_ingest_noise) {
    for (int i = 0; i < 3; ++i) {
      Extra e{sha256_hex("synth-extra:" + std::to_string(options.seed) + ":" + std::to_string(i)),
              i == 0 ? "Dr.Web vxCube" : "CAPA", true, make_document(rng.next(), {}, false)};
      for (auto& entry : e.document["data"]) entry["attributes"]["sandbox_name"] = e.sandbox;
      extras.push_back(std::move(e));
    }
    for (int i = 0; i < 2; ++i) {
      Extra e{sha256_hex("synth-unlabeled:" + std::to_string(options.seed) + ":" + std::to_string(i)),
              rng.pick(kSandboxes), false, make_document(rng.next(), {}, false)};
      for (auto& entry : e.document["data"]) entry["attributes"]["sandbox_name"] = e.sandbox;
      extras.push_back(std::move(e));
    }
  }

  auto write_raw = [&](const std::string& id, json doc, bool malicious) {
    add_banned_fields(rng, doc, malicious);
    std::ofstream out(out_dir / "raw" / (id + ".json"), std::ios::trunc);
    if (!out) throw DataError("cannot write raw report " + id);
    out << doc.dump(1) << '\n';
  };

  std::ofstream labels(out_dir / "labels.csv", std::ios::trunc);
  std::ofstream scores(out_dir / "gbdt_scores.csv", std::ios::trunc);
  if (!labels || !scores) throw DataError("cannot write synthetic corpus files in " + out_dir.string());
  csv::write_row(labels, {"sample_id", "label", "family", "first_seen", "sandbox"});
  csv::write_row(scores, {"sample_id", "probability"});
  for (const auto& s : samples) {
    write_raw(s.id, s.document, s.label == Label::malicious);
    char date[16];
    std::snprintf(date, sizeof date, "%04d-%02d-%02d", s.first_seen.year, s.first_seen.month, s.first_seen.day);
    csv::write_row(labels, {s.id, std::string(to_string(s.label)), s.family, date, s.sandbox});
    csv::write_row(scores, {s.id, fmt_prob(s.gbdt)});
    ++(s.label == Label::malicious ? summary.malware : summary.benign);
  }
  for (const auto& e : extras) {
    write_raw(e.id, e.document, false);
    if (e.labeled) {
      csv::write_row(labels, {e.id, "benign", "", options.start.str() + "-15", e.sandbox});
      ++summary.excluded_source;
    } else {
      ++summary.unlabeled;
    }
  }
  summary.labeled_reports = samples.size();

  {
    std::ofstream out(out_dir / "llm_cache.jsonl", std::ios::trunc);
    for (const auto& e : entries) out << e.to_json().dump() << '\n';
    summary.cache_entries = entries.size();
  }
  {
    std::ofstream out(out_dir / "reference_rules.jsonl", std::ios::trunc);
    for (const auto& b : behaviors()) {
      auto it = reference_origin.find(b.id);
      if (it == reference_origin.end()) continue;
      json r = {{"id", "reference#" + b.id},
                {"name", b.names.front()},
                {"description", b.description},
                {"source", rule_source(b, b.names.front())},
                {"origin", it->second},
                {"status", "raw"},
                {"reason", nullptr},
                {"cluster_id", nullptr}};
      out << r.dump() << '\n';
      ++summary.reference_rules;
    }
  }
  return summary;
}

}  // namespace trident::synth

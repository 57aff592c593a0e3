#include "rtb/cli/run_config.hpp"

#include <fstream>
#include <sstream>

#include "rtb/common/error.hpp"
#include "rtb/common/text.hpp"

namespace rtb::cli {

std::string source_name(Source source) {
  switch (source) {
    case Source::kDefault: return "default";
    case Source::kEnv: return "env";
    case Source::kFile: return "file";
    case Source::kFlag: return "flag";
  }
  return "?";
}

IniFile IniFile::parse(std::string_view body, const std::string& origin) {
  IniFile f;
  std::string section = "common";
  std::size_t line_no = 0;
  for (auto line : text::split(body, '\n')) {
    ++line_no;
    if (const auto c = line.find_first_of("#;"); c != std::string_view::npos) line = line.substr(0, c);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto where = origin + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config", where + ": unterminated section header");
      section = std::string(text::trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw ConfigError("config", where + ": empty section name");
      f.sections_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("config", where + ": expected key = value");
    std::string key(text::trim(line.substr(0, eq)));
    if (key.starts_with("--")) key.erase(0, 2);
    if (key.empty()) throw ConfigError("config", where + ": empty key");
    f.sections_[section][key] = std::string(text::trim(line.substr(eq + 1)));
  }
  return f;
}

IniFile IniFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

RunConfig::RunConfig(std::string command, std::string section)
    : command_(std::move(command)), section_(std::move(section)) {}

void RunConfig::declare(const Knob& knob) {
  Entry e;
  e.knob = knob;
  e.value = knob.default_value;
  knobs_[knob.key] = std::move(e);
}

void RunConfig::set(const std::string& key, std::string value, Source source) {
  auto it = knobs_.find(key);
  if (it == knobs_.end()) throw ConfigError(key, "not a setting of '" + command_ + "'");
  it->second.value = std::move(value);
  it->second.source = source;
}

void RunConfig::apply_file(const IniFile& file, const std::set<std::string>& known_elsewhere,
                           const std::set<std::string>& sections) {
  for (const auto& [name, _] : file.sections()) {
    if (name != "common" && !sections.count(name)) throw ConfigError("config", "unknown section [" + name + "]");
  }
  for (const std::string& name : {std::string("common"), section_}) {
    auto it = file.sections().find(name);
    if (it == file.sections().end()) continue;
    for (const auto& [key, value] : it->second) {
      if (declared(key)) {
        set(key, value, Source::kFile);
      } else if (name != "common" || !known_elsewhere.count(key)) {
        throw ConfigError(key, "unknown key in [" + name + "]");
      }
    }
  }
}

const RunConfig::Entry& RunConfig::entry(const std::string& key) const {
  auto it = knobs_.find(key);
  if (it == knobs_.end()) throw ConfigError(key, "not a setting of '" + command_ + "'");
  return it->second;
}

bool RunConfig::has(const std::string& key) const {
  auto it = knobs_.find(key);
  return it != knobs_.end() && !it->second.value.empty();
}

const std::string& RunConfig::get(const std::string& key) const { return entry(key).value; }

std::int64_t RunConfig::get_int(const std::string& key) const {
  const auto& v = get(key);
  const auto parsed = text::parse_int<std::int64_t>(v);
  if (!parsed) throw ConfigError(key, "expected an integer, got '" + v + "'");
  return *parsed;
}

double RunConfig::get_double(const std::string& key) const {
  const auto& v = get(key);
  const auto parsed = text::parse_double(v);
  if (!parsed) throw ConfigError(key, "expected a number, got '" + v + "'");
  return *parsed;
}

bool RunConfig::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const { return text::split_list(get(key)); }

Source RunConfig::source(const std::string& key) const { return entry(key).source; }

std::string RunConfig::serialize() const {
  std::string out = "command=" + command_ + "\n";
  for (const auto& [key, e] : knobs_) out += key + "=" + e.value + "\n";
  return out;
}

std::string RunConfig::provenance() const {
  static const std::set<std::string> kLocation{"out", "curve", "trace", "output-dir", "cache-dir", "config", "jobs", "log-level"};
  std::string out = "command=" + command_ + "\n";
  for (const auto& [key, e] : knobs_) {
    if (!kLocation.count(key)) out += key + "=" + e.value + "\n";
  }
  return out;
}

}  // namespace rtb::cli

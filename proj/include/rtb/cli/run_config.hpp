#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace rtb::cli {

struct Knob {
  std::string key;            // flag name without the leading dashes; also the file key
  std::string default_value;  // empty means unset
  std::string help;
  bool flag = false;          // boolean switch: --key / --no-key
};

enum class Source { kDefault, kEnv, kFile, kFlag };

std::string source_name(Source source);

// `key = value` lines grouped by `[section]`. Keys before the first header land in
// "common". '#' and ';' start comments.
class IniFile {
 public:
  static IniFile parse(std::string_view text, const std::string& origin = "config");
  static IniFile load(const std::filesystem::path& path);

  using Section = std::map<std::string, std::string>;
  const std::map<std::string, Section>& sections() const { return sections_; }

 private:
  std::map<std::string, Section> sections_;
};

// Resolved settings of one subcommand. Precedence, lowest to highest:
// declared default < environment < [common] file section < [command] file section < flag.
class RunConfig {
 public:
  explicit RunConfig(std::string command, std::string section);

  void declare(const Knob& knob);
  // Throws ConfigError for undeclared keys.
  void set(const std::string& key, std::string value, Source source);
  // `known_elsewhere` lists keys other subcommands declare; such keys in [common] are
  // ignored instead of rejected. Unknown sections are rejected.
  void apply_file(const IniFile& file, const std::set<std::string>& known_elsewhere,
                  const std::set<std::string>& sections);

  const std::string& command() const { return command_; }
  bool declared(const std::string& key) const { return knobs_.count(key) > 0; }
  bool has(const std::string& key) const;  // declared and non-empty
  const std::string& get(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;
  Source source(const std::string& key) const;

  // "command=...\nkey=value\n..." with keys sorted; unset keys are listed empty.
  std::string serialize() const;
  // serialize() without the settings that only choose where outputs go or how many
  // workers run (out, curve, trace, output-dir, cache-dir, config, jobs, log-level). Embedded in
  // artifacts, so identical runs writing to different paths produce identical bytes.
  std::string provenance() const;

 private:
  struct Entry {
    Knob knob;
    std::string value;
    Source source = Source::kDefault;
  };
  const Entry& entry(const std::string& key) const;

  std::string command_;
  std::string section_;
  std::map<std::string, Entry> knobs_;
};

}  // namespace rtb::cli

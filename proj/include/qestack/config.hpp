#pragma once

// Run configuration: typed key=value pairs from a plain-text file, one pair
// per line, '#' starts a comment. Unknown keys are rejected. Values set by
// command-line flags override the file, which overrides the defaults.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "qestack/errors.hpp"
#include "qestack/text_io.hpp"

namespace qestack::cli {

enum class KeyType { integer, real, boolean, text, real_list };

struct KeySpec {
  std::string_view name;
  KeyType type;
  std::string_view default_value;
  std::string_view help;
};

inline const std::vector<KeySpec>& config_schema() {
  static const std::vector<KeySpec> schema = {
      {"seed", KeyType::integer, "1", "root seed for every randomized step"},
      {"jobs", KeyType::integer, "1", "worker threads"},
      {"layout", KeyType::text, "interleaved", "target tag files: interleaved or words_only"},
      {"threshold", KeyType::real, "0.5", "BAD iff probability >= threshold"},
      {"hter_cap", KeyType::boolean, "true", "cap HTER at 1"},
      {"epochs", KeyType::integer, "10", "MIRA epochs"},
      {"C", KeyType::real, "1", "MIRA aggressiveness"},
      {"average", KeyType::boolean, "true", "average MIRA weights"},
      {"gamma", KeyType::real, "1", "logistic calibration of max-marginal margins"},
      {"bins", KeyType::integer, "10", "bins for stacked probabilities"},
      {"templates", KeyType::text, "bias,current_word,context_words,source_words,extra_columns,stacked,bigram",
       "enabled feature templates"},
      {"k", KeyType::integer, "10", "folds for jackknife and cross-validation"},
      {"optimize_threshold", KeyType::boolean, "false", "search the ensemble threshold as well"},
      {"powell.tol", KeyType::real, "1e-06", "stop when a cycle improves less than this"},
      {"powell.max_cycles", KeyType::integer, "20", "maximum Powell cycles"},
      {"powell.line_samples", KeyType::integer, "101", "grid points per line search"},
      {"lambda_grid", KeyType::real_list, "0.001,0.01,0.1,1,10,100", "ridge regularization grid"},
      {"doc.lambda", KeyType::real, "0", "ridge constant for the document MQM regression"},
      {"mqm.minor", KeyType::real, "1", "MQM weight of minor errors"},
      {"mqm.major", KeyType::real, "5", "MQM weight of major errors"},
      {"mqm.critical", KeyType::real, "10", "MQM weight of critical errors"},
      {"mqm.floor", KeyType::text, "none", "lower bound on MQM scores, or none"},
      {"severity", KeyType::text, "major", "severity assigned to annotations built from tags"},
  };
  return schema;
}

inline const KeySpec* find_key(std::string_view name) {
  for (const auto& k : config_schema()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : config_schema()) values_[std::string(k.name)] = std::string(k.default_value);
  }

  // `origin` names the source of the value in error messages.
  void set(std::string_view key, std::string_view value, const std::string& origin) {
    const KeySpec* spec = find_key(key);
    if (spec == nullptr) throw ConfigError(origin + ": unknown key '" + std::string(key) + "'");
    const std::string v(text::trim(value));
    check(*spec, v, origin);
    values_[std::string(key)] = v;
  }

  void merge_file(const std::filesystem::path& path) {
    const auto lines = text::read_lines(path, true);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::string_view line = lines[i];
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = text::trim(line);
      if (line.empty()) continue;
      const std::string origin = path.string() + ":" + std::to_string(i + 1);
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError(origin + ": expected key=value");
      set(text::trim(line.substr(0, eq)), line.substr(eq + 1), origin);
    }
  }

  const std::string& get(std::string_view key) const {
    const auto it = values_.find(std::string(key));
    if (it == values_.end()) throw ConfigError("unknown key '" + std::string(key) + "'");
    return it->second;
  }

  long long get_int(std::string_view key) const {
    long long v = 0;
    parse_int(get(key), v);
    return v;
  }

  double get_real(std::string_view key) const {
    double v = 0.0;
    text::parse_double(get(key), v);
    return v;
  }

  bool get_bool(std::string_view key) const { return get(key) == "true"; }

  std::vector<double> get_reals(std::string_view key) const {
    std::vector<double> out;
    for (auto f : text::split(get(key), ',')) {
      double v = 0.0;
      text::parse_double(text::trim(f), v);
      out.push_back(v);
    }
    return out;
  }

  // Sorted key=value lines, no timestamps, so identical runs give identical
  // snapshots.
  std::string snapshot(std::string_view command) const {
    std::string out = "# qe-stack effective configuration\ncommand=" + std::string(command) + "\n";
    for (const auto& [key, value] : values_) out += key + "=" + value + "\n";
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static bool parse_int(std::string_view s, long long& out) {
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end && !s.empty();
  }

  static void check(const KeySpec& spec, const std::string& v, const std::string& origin) {
    const std::string where = origin + ": " + std::string(spec.name) + "=" + v + ": ";
    double real = 0.0;
    long long integer = 0;
    switch (spec.type) {
      case KeyType::integer:
        if (!parse_int(v, integer)) throw ConfigError(where + "expected an integer");
        break;
      case KeyType::real:
        if (!text::parse_double(v, real) || !std::isfinite(real)) throw ConfigError(where + "expected a number");
        break;
      case KeyType::boolean:
        if (v != "true" && v != "false") throw ConfigError(where + "expected true or false");
        break;
      case KeyType::real_list:
        if (v.empty()) throw ConfigError(where + "expected a comma-separated list of numbers");
        for (auto f : text::split(v, ',')) {
          if (!text::parse_double(text::trim(f), real) || !std::isfinite(real) || real < 0.0) {
            throw ConfigError(where + "expected a comma-separated list of nonnegative numbers");
          }
        }
        break;
      case KeyType::text:
        break;
    }

    const std::string_view name = spec.name;
    auto require = [&](bool ok, const char* what) {
      if (!ok) throw ConfigError(where + what);
    };
    if (name == "jobs" || name == "epochs" || name == "bins") require(integer >= 1, "must be at least 1");
    if (name == "seed") require(integer >= 0, "must be nonnegative");
    if (name == "k") require(integer >= 2, "must be at least 2");
    if (name == "powell.max_cycles") require(integer >= 1, "must be at least 1");
    if (name == "powell.line_samples") require(integer >= 2, "must be at least 2");
    if (name == "threshold") require(real >= 0.0 && real <= 1.0, "must lie in [0,1]");
    if (name == "C" || name == "gamma") require(real > 0.0, "must be positive");
    if (name == "powell.tol" || name == "doc.lambda" || (name.starts_with("mqm.") && name != "mqm.floor")) {
      require(real >= 0.0, "must be nonnegative");
    }
    if (name == "layout") require(v == "interleaved" || v == "words_only", "expected interleaved or words_only");
    if (name == "severity") require(v == "minor" || v == "major" || v == "critical", "expected minor, major or critical");
    if (name == "mqm.floor" && v != "none") {
      require(text::parse_double(v, real) && std::isfinite(real), "expected a number or none");
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace qestack::cli

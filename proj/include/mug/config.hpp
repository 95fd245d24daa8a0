#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mug/error.hpp"
#include "mug/io.hpp"

namespace mug {

// A named, string-addressable configuration value bound to a struct member.
struct ConfigField {
  std::string key;
  std::function<std::string()> get;
  std::function<void(std::string_view)> set;
};

using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

namespace cfgbind {

inline ConfigField size(std::string key, std::size_t& ref) {
  return {key, [&ref] { return std::to_string(ref); },
          [&ref, key](std::string_view v) {
            const auto x = parse_int<long long>(v);
            if (!x || *x < 0) throw SpecError(key + ": expected a non-negative integer, got '" + std::string(v) + "'");
            ref = std::size_t(*x);
          }};
}

inline ConfigField u64(std::string key, std::uint64_t& ref) {
  return {key, [&ref] { return std::to_string(ref); },
          [&ref, key](std::string_view v) {
            const auto x = parse_int<std::uint64_t>(v);
            if (!x) throw SpecError(key + ": expected an unsigned integer, got '" + std::string(v) + "'");
            ref = *x;
          }};
}

inline ConfigField real(std::string key, double& ref) {
  return {key, [&ref] { return format_double(ref); },
          [&ref, key](std::string_view v) {
            const auto x = parse_double(v);
            if (!x) throw SpecError(key + ": expected a number, got '" + std::string(v) + "'");
            ref = *x;
          }};
}

inline ConfigField flag(std::string key, bool& ref) {
  return {key, [&ref] { return std::string(ref ? "true" : "false"); },
          [&ref, key](std::string_view v) {
            if (v == "true" || v == "1") ref = true;
            else if (v == "false" || v == "0") ref = false;
            else throw SpecError(key + ": expected true or false, got '" + std::string(v) + "'");
          }};
}

}  // namespace cfgbind

inline void config_set(std::vector<ConfigField> fields, std::string_view key, std::string_view value) {
  for (auto& f : fields)
    if (f.key == key) return f.set(value);
  throw SpecError("unknown config key '" + std::string(key) + "'");
}

inline bool config_has(const std::vector<ConfigField>& fields, std::string_view key) {
  for (const auto& f : fields)
    if (f.key == key) return true;
  return false;
}

inline ConfigEcho config_echo(const std::vector<ConfigField>& fields) {
  ConfigEcho out;
  for (const auto& f : fields) out.emplace_back(f.key, f.get());
  return out;
}

// Flat "key = value" or "key value" lines, '#' comments. Returns pairs in
// file order; errors carry line numbers.
inline ConfigEcho parse_config_text(const std::string& text) {
  ConfigEcho out;
  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t sep = line.find('=');
    if (sep == std::string_view::npos) sep = line.find_first_of(" \t");
    if (sep == std::string_view::npos) throw SpecError("expected 'key = value'", i + 1);
    const auto key = trim(line.substr(0, sep)), value = trim(line.substr(sep + 1));
    if (key.empty() || value.empty()) throw SpecError("expected 'key = value'", i + 1);
    out.emplace_back(std::string(key), std::string(value));
  }
  return out;
}

inline std::string format_echo(const ConfigEcho& echo) {
  std::string out;
  for (const auto& [k, v] : echo) out += k + " = " + v + "\n";
  return out;
}

}  // namespace mug

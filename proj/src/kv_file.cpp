#include "storage_dqn/kv_file.hpp"

#include <fstream>
#include <sstream>

#include "storage_dqn/errors.hpp"

namespace storage_dqn {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse(std::string_view text, const std::string& origin) {
  KeyValueFile file;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    // strip comments that are not inside quotes
    bool in_quotes = false;
    std::size_t cut = line.size();
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_quotes = !in_quotes;
      if (line[i] == '#' && !in_quotes) {
        cut = i;
        break;
      }
    }
    line = trim(line.substr(0, cut));
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected `key = value`");
    }
    std::string_view key = trim(line.substr(0, eq));
    std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    }
    if (!value.empty() && value.front() == '"') {
      if (value.size() < 2 || value.back() != '"') {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": unterminated quote");
      }
      value = value.substr(1, value.size() - 2);
    }
    file.entries_.emplace_back(std::string(key), std::string(value));
    if (end == text.size()) break;
  }
  return file;
}

KeyValueFile KeyValueFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

std::optional<std::string> KeyValueFile::get(std::string_view key) const {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->first == key) return it->second;
  }
  return std::nullopt;
}

std::vector<std::string> KeyValueFile::get_all(std::string_view key) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) {
    if (k == key) out.push_back(v);
  }
  return out;
}

bool KeyValueFile::contains(std::string_view key) const { return get(key).has_value(); }

void KeyValueFile::set(const std::string& key, const std::string& value) {
  erase(key);
  entries_.emplace_back(key, value);
}

void KeyValueFile::append(const std::string& key, const std::string& value) {
  entries_.emplace_back(key, value);
}

void KeyValueFile::erase(std::string_view key) {
  std::erase_if(entries_, [&](const auto& e) { return e.first == key; });
}

std::string KeyValueFile::to_string() const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    out += k;
    out += " = \"";
    out += v;
    out += "\"\n";
  }
  return out;
}

}  // namespace storage_dqn

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace storage_dqn {

// Ordered flat key-value document. Lines are `key = value`; values may be
// double-quoted; `#` starts a comment outside quotes. Keys may repeat.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::string_view text, const std::string& origin = "<string>");
  static KeyValueFile load(const std::string& path);

  // Last value for key, if any.
  std::optional<std::string> get(std::string_view key) const;
  // All values for a repeated key, in file order.
  std::vector<std::string> get_all(std::string_view key) const;
  bool contains(std::string_view key) const;

  // Replaces every occurrence of key with a single entry.
  void set(const std::string& key, const std::string& value);
  void append(const std::string& key, const std::string& value);
  void erase(std::string_view key);

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  // Serializes back to the file syntax; values are always quoted.
  std::string to_string() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace storage_dqn

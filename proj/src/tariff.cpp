#include "storage_dqn/tariff.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "storage_dqn/errors.hpp"
#include "storage_dqn/kv_file.hpp"

namespace storage_dqn {

std::vector<std::string> validate(const std::vector<TariffSlot>& slots, double base_price) {
  std::vector<std::string> violations;
  if (!std::isfinite(base_price)) violations.emplace_back("base_price is not finite");

  int cover[24] = {};
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& s = slots[i];
    std::ostringstream name;
    name << "slot " << i << " [" << s.start_hour << "," << s.end_hour << ")";
    if (s.start_hour < 0 || s.end_hour > 24 || s.start_hour >= s.end_hour) {
      violations.push_back(name.str() + ": bounds must satisfy 0 <= start < end <= 24");
      continue;
    }
    if (!std::isfinite(s.adder)) {
      violations.push_back(name.str() + ": adder is not finite");
    } else if (base_price + s.adder < 0.0) {
      violations.push_back(name.str() + ": negative effective price");
    }
    for (int h = s.start_hour; h < s.end_hour; ++h) ++cover[h];
  }
  for (int h = 0; h < 24; ++h) {
    if (cover[h] == 0) violations.push_back("gap: hour " + std::to_string(h) + " not covered");
    if (cover[h] > 1) violations.push_back("overlap: hour " + std::to_string(h) + " covered " +
                                           std::to_string(cover[h]) + " times");
  }
  return violations;
}

TariffSchedule::TariffSchedule(std::vector<TariffSlot> slots, double base_price)
    : slots_(std::move(slots)), base_price_(base_price) {
  const auto violations = validate(slots_, base_price_);
  if (!violations.empty()) {
    std::string msg = "invalid tariff schedule:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw ConfigError(msg);
  }
  std::stable_sort(slots_.begin(), slots_.end(),
                   [](const TariffSlot& a, const TariffSlot& b) { return a.start_hour < b.start_hour; });
  for (const auto& s : slots_) {
    for (int h = s.start_hour; h < s.end_hour; ++h) hourly_[h] = base_price_ + s.adder;
  }
}

double TariffSchedule::price_at(int hour) const {
  if (hour < 0 || hour > 23) throw DomainError("hour out of range [0, 23]: " + std::to_string(hour));
  return hourly_[hour];
}

std::size_t TariffSchedule::slot_index(int hour) const {
  if (hour < 0 || hour > 23) throw DomainError("hour out of range [0, 23]: " + std::to_string(hour));
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (hour >= slots_[i].start_hour && hour < slots_[i].end_hour) return i;
  }
  throw DomainError("hour not covered by schedule");  // unreachable for a valid schedule
}

double TariffSchedule::min_price() const { return *std::min_element(hourly_, hourly_ + 24); }

double TariffSchedule::max_price() const { return *std::max_element(hourly_, hourly_ + 24); }

TariffSchedule builtin_schedule(std::string_view name) {
  if (name == "table1") {
    return TariffSchedule({{0, 8, 1.0}, {8, 16, 3.0}, {16, 24, 2.0}}, 0.0);
  }
  if (name == "tata") {
    return TariffSchedule({{0, 6, -0.75},
                           {6, 9, 0.0},
                           {9, 12, 0.5},
                           {12, 18, 0.0},
                           {18, 22, 1.0},
                           {22, 24, -0.75}},
                          5.0);
  }
  throw ConfigError("unknown builtin tariff: '" + std::string(name) + "' (expected table1 or tata)");
}

namespace {

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  T value{};
  const char* first = text.data();
  if (!text.empty() && text.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("invalid " + std::string(what) + ": '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

TariffSlot parse_slot(std::string_view text) {
  const auto c1 = text.find(',');
  const auto c2 = c1 == std::string_view::npos ? c1 : text.find(',', c1 + 1);
  if (c1 == std::string_view::npos || c2 == std::string_view::npos ||
      text.find(',', c2 + 1) != std::string_view::npos) {
    throw ConfigError("slot must be \"start,end,adder\": '" + std::string(text) + "'");
  }
  TariffSlot slot;
  slot.start_hour = parse_number<int>(text.substr(0, c1), "slot start hour");
  slot.end_hour = parse_number<int>(text.substr(c1 + 1, c2 - c1 - 1), "slot end hour");
  slot.adder = parse_number<double>(text.substr(c2 + 1), "slot adder");
  return slot;
}

void append_slot(std::vector<TariffSlot>& slots, const TariffSlot& slot) {
  if (slot.start_hour > slot.end_hour && slot.end_hour >= 0 && slot.start_hour < 24) {
    slots.push_back({slot.start_hour, 24, slot.adder});
    if (slot.end_hour > 0) slots.push_back({0, slot.end_hour, slot.adder});
    return;
  }
  slots.push_back(slot);
}

TariffSchedule load_tariff_file(const std::string& path) {
  const auto kv = KeyValueFile::load(path);
  double base = 0.0;
  if (auto b = kv.get("base_price")) base = parse_number<double>(*b, "base_price");
  std::vector<TariffSlot> slots;
  for (const auto& s : kv.get_all("slot")) append_slot(slots, parse_slot(s));
  if (slots.empty()) throw ConfigError(path + ": no `slot` entries");
  return TariffSchedule(std::move(slots), base);
}

void DemandResponseConfig::check() const {
  if (!enabled) return;
  if (!(limit_wh > 0.0)) throw ConfigError("demand response limit must be > 0 Wh");
  if (!(penalty_rate >= 0.0)) throw ConfigError("demand response penalty_rate must be >= 0");
}

std::string_view to_string(DemandResponseMode mode) {
  return mode == DemandResponseMode::PerInterval ? "per_interval" : "daily_cumulative";
}

DemandResponseMode parse_dr_mode(std::string_view text) {
  if (text == "per_interval") return DemandResponseMode::PerInterval;
  if (text == "daily_cumulative") return DemandResponseMode::DailyCumulative;
  throw ConfigError("unknown demand response mode: '" + std::string(text) + "'");
}

}  // namespace storage_dqn

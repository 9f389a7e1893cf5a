#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace storage_dqn {

// One half-open interval [start_hour, end_hour) of the day with a price adder.
struct TariffSlot {
  int start_hour = 0;
  int end_hour = 24;
  double adder = 0.0;  // currency/kWh, added to the base price
};

// Piecewise-constant time-of-day price schedule. Prices in currency per kWh.
// Wrap-around periods (e.g. 22:00-06:00) are stored as two slots.
class TariffSchedule {
 public:
  TariffSchedule() = default;

  // Throws ConfigError if the slots do not form a valid schedule.
  TariffSchedule(std::vector<TariffSlot> slots, double base_price);

  // Effective price (base + adder) for an hour in [0, 23]. Throws DomainError otherwise.
  double price_at(int hour) const;

  const std::vector<TariffSlot>& slots() const { return slots_; }
  double base_price() const { return base_price_; }

  double min_price() const;
  double max_price() const;

  // Index into slots() of the slot containing `hour`.
  std::size_t slot_index(int hour) const;

 private:
  std::vector<TariffSlot> slots_;
  double base_price_ = 0.0;
  double hourly_[24] = {};
};

// Reports gaps, overlaps, malformed bounds, and negative effective prices.
// An empty result means the schedule is valid.
std::vector<std::string> validate(const std::vector<TariffSlot>& slots, double base_price);

// "table1" (three-slot 1/3/2 schedule) or "tata" (base 5 with ToD adders).
TariffSchedule builtin_schedule(std::string_view name);

// Parses a flat key-value tariff file: `base_price = 5` and repeated
// `slot = "start,end,adder"` lines. `#` starts a comment.
TariffSchedule load_tariff_file(const std::string& path);

// Parses one "start,end,adder" slot entry.
TariffSlot parse_slot(std::string_view text);

// Appends a slot, splitting a wrap-around slot (start > end, e.g. 22,6) into
// [start, 24) and [0, end).
void append_slot(std::vector<TariffSlot>& slots, const TariffSlot& slot);

enum class DemandResponseMode { PerInterval, DailyCumulative };

struct DemandResponseConfig {
  bool enabled = false;
  double limit_wh = 700.0;
  DemandResponseMode mode = DemandResponseMode::DailyCumulative;
  double penalty_rate = 2.0;  // currency per kWh above the limit

  // Throws ConfigError when enabled with limit <= 0 or penalty_rate < 0.
  void check() const;
};

std::string_view to_string(DemandResponseMode mode);
DemandResponseMode parse_dr_mode(std::string_view text);

}  // namespace storage_dqn

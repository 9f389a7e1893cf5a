#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace storage_dqn {

inline constexpr int kHoursPerDay = 24;

enum class LoadSource { Csv, Synthetic };

// Hourly household consumption, in Wh per hour, a whole number of days long.
class LoadProfile {
 public:
  LoadProfile() = default;
  // Throws DataError unless values are finite, non-negative, and a multiple of 24 long.
  LoadProfile(std::vector<double> hourly, LoadSource source);

  std::span<const double> hourly() const { return hourly_; }
  std::span<const double> day(std::size_t index) const;
  std::size_t day_count() const { return hourly_.size() / kHoursPerDay; }
  LoadSource source() const { return source_; }
  // Hex SHA-256 of the values; changes iff content changes.
  const std::string& digest() const { return digest_; }
  double max_load() const;

 private:
  std::vector<double> hourly_;
  LoadSource source_ = LoadSource::Synthetic;
  std::string digest_;
};

// Reads a `hour_index,load_wh` CSV. Indices must be contiguous from 0.
LoadProfile load_csv(const std::string& path);
void write_csv(const LoadProfile& profile, const std::string& path);

// Residential-looking synthetic load: flat base with an evening peak window and
// multiplicative noise. Values are rounded to whole Wh.
struct SyntheticSpec {
  double base_load_w = 200.0;
  double evening_peak_w = 600.0;
  int peak_start = 18;  // first peak hour
  int peak_end = 24;    // one past the last peak hour
  double noise_frac = 0.1;
  std::uint64_t seed = 7;
  int days = 60;

  void check() const;
};

LoadProfile generate(const SyntheticSpec& spec);

// Contiguous split: the first train_days for training, the following test_days for testing.
std::pair<LoadProfile, LoadProfile> split(const LoadProfile& profile, std::size_t train_days,
                                          std::size_t test_days);

// Sub-profile of `count` days starting at day `first`.
LoadProfile slice_days(const LoadProfile& profile, std::size_t first, std::size_t count);

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(const std::string& text);

}  // namespace storage_dqn

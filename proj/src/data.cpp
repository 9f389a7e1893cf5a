#include "storage_dqn/data.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "storage_dqn/errors.hpp"

namespace storage_dqn {

std::string sha256_hex(std::span<const unsigned char> bytes) {
  unsigned char md[SHA256_DIGEST_LENGTH];
  SHA256(bytes.data(), bytes.size(), md);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char c : md) {
    out += kHex[c >> 4];
    out += kHex[c & 0xf];
  }
  return out;
}

std::string sha256_hex(const std::string& text) {
  return sha256_hex(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

LoadProfile::LoadProfile(std::vector<double> hourly, LoadSource source)
    : hourly_(std::move(hourly)), source_(source) {
  if (hourly_.size() % kHoursPerDay != 0) {
    throw DataError("load profile length " + std::to_string(hourly_.size()) +
                    " is not a multiple of 24");
  }
  for (std::size_t i = 0; i < hourly_.size(); ++i) {
    if (!std::isfinite(hourly_[i]) || hourly_[i] < 0.0) {
      throw DataError("load at hour_index " + std::to_string(i) + " must be finite and >= 0");
    }
  }
  // canonical little-endian encoding of the values
  std::vector<unsigned char> bytes(hourly_.size() * sizeof(double));
  for (std::size_t i = 0; i < hourly_.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &hourly_[i], sizeof bits);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  digest_ = sha256_hex(bytes);
}

std::span<const double> LoadProfile::day(std::size_t index) const {
  if (index >= day_count()) {
    throw DomainError("day " + std::to_string(index) + " out of range (profile has " +
                      std::to_string(day_count()) + " days)");
  }
  return std::span(hourly_).subspan(index * kHoursPerDay, kHoursPerDay);
}

double LoadProfile::max_load() const {
  return hourly_.empty() ? 0.0 : *std::max_element(hourly_.begin(), hourly_.end());
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

LoadProfile load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open load profile: " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "hour_index,load_wh") {
    throw DataError(path + ": expected header `hour_index,load_wh`");
  }
  std::vector<double> values;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto comma = text.find(',');
    const std::string where = path + ": row " + std::to_string(row);
    if (comma == std::string_view::npos) throw DataError(where + ": expected two columns");
    const auto idx_text = trim(text.substr(0, comma));
    const auto val_text = trim(text.substr(comma + 1));
    long long index = 0;
    auto r1 = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), index);
    if (r1.ec != std::errc() || r1.ptr != idx_text.data() + idx_text.size()) {
      throw DataError(where + ": non-numeric hour_index '" + std::string(idx_text) + "'");
    }
    double value = 0.0;
    auto r2 = std::from_chars(val_text.data(), val_text.data() + val_text.size(), value);
    if (r2.ec != std::errc() || r2.ptr != val_text.data() + val_text.size()) {
      throw DataError(where + ": non-numeric load_wh '" + std::string(val_text) + "'");
    }
    if (index != static_cast<long long>(values.size())) {
      throw DataError(where + ": hour_index " + std::to_string(index) + " breaks contiguity (expected " +
                      std::to_string(values.size()) + ")");
    }
    if (!std::isfinite(value) || value < 0.0) {
      throw DataError(where + ": load_wh must be finite and >= 0, got " + std::string(val_text));
    }
    values.push_back(value);
  }
  if (values.empty()) throw DataError(path + ": no data rows");
  if (values.size() % kHoursPerDay != 0) {
    throw DataError(path + ": " + std::to_string(values.size()) +
                    " rows is not a multiple of 24 (missing rows?)");
  }
  return LoadProfile(std::move(values), LoadSource::Csv);
}

void write_csv(const LoadProfile& profile, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write load profile: " + path);
  out << "hour_index,load_wh\n";
  const auto hourly = profile.hourly();
  for (std::size_t i = 0; i < hourly.size(); ++i) out << i << ',' << format_number(hourly[i]) << '\n';
  if (!out) throw DataError("write failed: " + path);
}

void SyntheticSpec::check() const {
  if (days < 1) throw ConfigError("synthetic profile needs days >= 1");
  if (!(base_load_w >= 0.0) || !(evening_peak_w >= 0.0)) {
    throw ConfigError("synthetic load magnitudes must be >= 0");
  }
  if (!(noise_frac >= 0.0 && noise_frac < 1.0)) throw ConfigError("noise_frac must lie in [0, 1)");
  if (peak_start < 0 || peak_end > 24 || peak_start > peak_end) {
    throw ConfigError("peak hours must satisfy 0 <= start <= end <= 24");
  }
}

LoadProfile generate(const SyntheticSpec& spec) {
  spec.check();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(spec.days) * kHoursPerDay);
  for (int d = 0; d < spec.days; ++d) {
    for (int h = 0; h < kHoursPerDay; ++h) {
      const bool peak = h >= spec.peak_start && h < spec.peak_end;
      const double mean = spec.base_load_w + (peak ? spec.evening_peak_w : 0.0);
      const double noise = spec.noise_frac > 0.0 ? spec.noise_frac * unit(rng) : 0.0;
      values.push_back(std::round(mean * (1.0 + noise)));
    }
  }
  return LoadProfile(std::move(values), LoadSource::Synthetic);
}

LoadProfile slice_days(const LoadProfile& profile, std::size_t first, std::size_t count) {
  if (first + count > profile.day_count()) {
    throw DomainError("requested days [" + std::to_string(first) + ", " + std::to_string(first + count) +
                      ") exceed profile of " + std::to_string(profile.day_count()) + " days");
  }
  const auto hourly = profile.hourly().subspan(first * kHoursPerDay, count * kHoursPerDay);
  return LoadProfile(std::vector<double>(hourly.begin(), hourly.end()), profile.source());
}

std::pair<LoadProfile, LoadProfile> split(const LoadProfile& profile, std::size_t train_days,
                                          std::size_t test_days) {
  if (train_days == 0) throw DataError("split: training needs at least one day");
  if (train_days + test_days > profile.day_count()) {
    throw DataError("split: " + std::to_string(train_days) + " + " + std::to_string(test_days) +
                    " days requested but profile has " + std::to_string(profile.day_count()));
  }
  return {slice_days(profile, 0, train_days), slice_days(profile, train_days, test_days)};
}

}  // namespace storage_dqn

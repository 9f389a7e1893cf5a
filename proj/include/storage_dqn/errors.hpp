#pragma once

#include <stdexcept>
#include <string>

namespace storage_dqn {

// Argument outside the mathematical domain of an operation (bad hour, zero baseline, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed or inconsistent configuration (unknown tariff name, invalid battery, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Misuse of a stateful API (stepping a finished episode, sampling an underfilled buffer).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Input data failed validation. Messages name the offending row when there is one.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Network parameters do not fit the observation or checkpoint they are paired with.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A computation would exceed its configured resource budget.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace storage_dqn

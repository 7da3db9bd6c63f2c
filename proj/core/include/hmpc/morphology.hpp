#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "hmpc/chain.hpp"

namespace hmpc {

struct NamedChain {
  std::string name;
  ChainModel chain;
};

/// Config-file problems: parse failures carry line/column, invariant
/// violations are listed exhaustively in the message.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what,
                       std::vector<std::string> violations = {})
      : std::runtime_error(what), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// The five benchmark morphologies A..E (4 to 6 DoF, pairwise distinct
/// joint-axis orderings, one spherical-wrist layout). Uniform 0.15 m
/// modules, limits +-2.75 rad, 2.0 rad/s, 0.5 rad/s^2.
const std::vector<NamedChain>& builtin_morphologies();

/// Lookup by name ("A".."E", case-insensitive). Throws ConfigError if absent.
const ChainModel& find_morphology(const std::string& name);

/// Parse a chain description (YAML document, see README for the schema).
/// Axes may be +-x/+-y/+-z or explicit 3-vectors; vectors within 1e-6 of
/// unit norm are normalized silently, anything further off is rejected.
/// Omitted limits default to the stock values.
ChainModel load_chain(const std::string& text);

/// Serialize so that load_chain(save_chain(c)) reproduces c exactly.
std::string save_chain(const ChainModel& chain, const std::string& name);

/// Empty iff every ChainModel invariant holds; violations name the
/// offending module index.
std::vector<std::string> validate_chain(const ChainModel& chain);

}  // namespace hmpc

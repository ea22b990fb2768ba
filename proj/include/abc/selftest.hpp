#pragma once

// Fast installation checks: oracle coverage, statistic hand-values,
// leave-one-out reweighting invariance and table persistence.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace abc {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string expected;
  std::string actual;
};

struct SelftestResult {
  std::vector<SelftestCheck> checks;
  bool passed() const;
};

/// When `table` is given its integrity is verified as an extra check.
SelftestResult run_selftest(const std::optional<std::filesystem::path>& table = std::nullopt);

/// One line per check; failures show expected vs actual.
void print_selftest(const SelftestResult& result, std::ostream& out);

}  // namespace abc

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tk/data.hpp"
#include "tk/metrics.hpp"

namespace tk::data {

inline constexpr const char* kBlankSymbol = "<blank>";

// Base vocabulary of one decoder: id 0 is blank, the rest are sorted units.
class TokenTable {
 public:
  TokenTable() = default;
  TokenTable(std::vector<std::string> symbols, metrics::Unit unit);

  // Units seen in any split's transcripts of the given orthography ('h' or 'p').
  static TokenTable build(const Dataset& dataset, char orthography);

  int size() const { return static_cast<int>(symbols_.size()); }
  metrics::Unit unit() const { return unit_; }
  const std::vector<std::string>& symbols() const { return symbols_; }

  std::vector<int> encode(const std::string& text, const std::string& utterance_id) const;
  // Ids outside the table (blank, dialect tokens) are skipped.
  std::string decode(std::span<const int> ids) const;

  void save(const std::filesystem::path& path) const;
  static TokenTable load(const std::filesystem::path& path);

 private:
  std::vector<std::string> symbols_;
  std::map<std::string, int> index_;
  metrics::Unit unit_ = metrics::Unit::kChar;
};

}  // namespace tk::data

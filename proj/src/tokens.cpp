#include "tk/tokens.hpp"

#include <fstream>
#include <set>

namespace tk::data {

TokenTable::TokenTable(std::vector<std::string> symbols, metrics::Unit unit)
    : symbols_(std::move(symbols)), unit_(unit) {
  if (symbols_.empty() || symbols_[0] != kBlankSymbol) throw SchemaError("token table must start with <blank>");
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (!index_.emplace(symbols_[i], static_cast<int>(i)).second) {
      throw SchemaError("token table lists '" + symbols_[i] + "' twice");
    }
  }
}

TokenTable TokenTable::build(const Dataset& dataset, char orthography) {
  if (orthography != 'h' && orthography != 'p') throw ContractError("orthography must be 'h' or 'p'");
  const metrics::Unit unit = orthography == 'h' ? metrics::Unit::kChar : metrics::Unit::kSyllable;
  std::set<std::string> units;
  for (const auto* split : {&dataset.train, &dataset.dev, &dataset.test}) {
    for (const Utterance& u : *split) {
      for (auto& s : metrics::tokenize(orthography == 'h' ? u.transcript_h : u.transcript_p, unit)) units.insert(s);
    }
  }
  std::vector<std::string> symbols{kBlankSymbol};
  symbols.insert(symbols.end(), units.begin(), units.end());
  return TokenTable(std::move(symbols), unit);
}

std::vector<int> TokenTable::encode(const std::string& text, const std::string& utterance_id) const {
  std::vector<int> ids;
  for (const std::string& s : metrics::tokenize(text, unit_)) {
    auto it = index_.find(s);
    if (it == index_.end()) throw DataError("utterance '" + utterance_id + "': unit '" + s + "' not in token table");
    ids.push_back(it->second);
  }
  return ids;
}

std::string TokenTable::decode(std::span<const int> ids) const {
  std::string out;
  bool first = true;
  for (int id : ids) {
    if (id <= 0 || id >= size()) continue;
    if (unit_ == metrics::Unit::kSyllable && !first) out += ' ';
    out += symbols_[static_cast<std::size_t>(id)];
    first = false;
  }
  return out;
}

void TokenTable::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write token table " + path.string());
  os << (unit_ == metrics::Unit::kChar ? "char" : "syllable") << '\n';
  for (const auto& s : symbols_) os << s << '\n';
}

TokenTable TokenTable::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read token table " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw SchemaError(path.string() + ": empty token table");
  const metrics::Unit unit = metrics::parse_unit(line);
  std::vector<std::string> symbols;
  while (std::getline(is, line)) symbols.push_back(line);
  return TokenTable(std::move(symbols), unit);
}

}  // namespace tk::data

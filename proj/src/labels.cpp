#include "rlid/labels.hpp"

#include "rlid/error.hpp"

namespace rlid {

LabelSet::LabelSet(const std::vector<std::string>& names) {
  for (const auto& name : names) {
    if (name.empty()) throw UsageError("label names must be non-empty");
    for (char c : name) {
      if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-')) {
        throw UsageError("label name '" + name + "' must be lowercase ASCII");
      }
    }
    if (find(name)) throw UsageError("duplicate label name '" + name + "'");
    labels_.push_back({static_cast<int>(labels_.size()), name});
  }
}

LabelSet LabelSet::defaults() { return LabelSet({"english", "hindi", "russian"}); }

LabelSet LabelSet::parse(std::string_view csv) {
  std::vector<std::string> names;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto comma = csv.find(',', start);
    const auto end = comma == std::string_view::npos ? csv.size() : comma;
    std::string_view item = csv.substr(start, end - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    names.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return LabelSet(names);
}

std::vector<std::string> LabelSet::names() const {
  std::vector<std::string> out;
  out.reserve(labels_.size());
  for (const auto& l : labels_) out.push_back(l.name);
  return out;
}

std::string LabelSet::joined() const {
  std::string out;
  for (const auto& l : labels_) {
    if (!out.empty()) out += ',';
    out += l.name;
  }
  return out;
}

std::optional<LanguageLabel> LabelSet::find(std::string_view name) const {
  for (const auto& l : labels_) {
    if (l.name == name) return l;
  }
  return std::nullopt;
}

const LanguageLabel& LabelSet::at(std::string_view name) const {
  for (const auto& l : labels_) {
    if (l.name == name) return l;
  }
  throw DataError("unknown label '" + std::string(name) + "' (known: " + joined() + ")");
}

}  // namespace rlid

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rlid {

struct LanguageLabel {
  int id = 0;
  std::string name;

  friend bool operator==(const LanguageLabel&, const LanguageLabel&) = default;
};

// Ordered class set. Ids are the positions 0..n-1; names are unique lowercase
// ASCII.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(const std::vector<std::string>& names);

  static LabelSet defaults();  // english, hindi, russian
  // Comma-separated list, e.g. "english,hindi,russian".
  static LabelSet parse(std::string_view csv);

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  const LanguageLabel& operator[](std::size_t id) const { return labels_.at(id); }
  const std::vector<LanguageLabel>& labels() const { return labels_; }
  std::vector<std::string> names() const;
  std::string joined() const;

  std::optional<LanguageLabel> find(std::string_view name) const;
  // Throws DataError for unknown names.
  const LanguageLabel& at(std::string_view name) const;

  auto begin() const { return labels_.begin(); }
  auto end() const { return labels_.end(); }

  friend bool operator==(const LabelSet&, const LabelSet&) = default;

 private:
  std::vector<LanguageLabel> labels_;
};

}  // namespace rlid

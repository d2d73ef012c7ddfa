#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "crashcast/matrix.hpp"

namespace crashcast {

// Feature rows with integer class labels (severity 0..3).
struct LabeledSet {
  std::vector<std::string> feature_names;
  Matrix x;
  std::vector<int> y;

  std::size_t size() const noexcept { return y.size(); }
  std::map<int, std::size_t> class_counts() const;
  LabeledSet subset(const std::vector<std::size_t>& rows) const;
};

// CSV with one column per feature plus a trailing SEVERITY column; NaN is
// written as an empty field. Throws kUnreadableFile / kMissingHeader /
// kInvalidArgument.
void write_labeled_csv(std::ostream& out, const LabeledSet& set);
void write_labeled_csv(const std::string& path, const LabeledSet& set);
LabeledSet read_labeled_csv(std::istream& in);
LabeledSet read_labeled_csv(const std::string& path);

}  // namespace crashcast

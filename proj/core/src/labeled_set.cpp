#include "crashcast/labeled_set.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "crashcast/error.hpp"
#include "crashcast/record_csv.hpp"

namespace crashcast {

std::map<int, std::size_t> LabeledSet::class_counts() const {
  std::map<int, std::size_t> c;
  for (int label : y) ++c[label];
  return c;
}

LabeledSet LabeledSet::subset(const std::vector<std::size_t>& rows) const {
  LabeledSet out;
  out.feature_names = feature_names;
  out.x = x.select_rows(rows);
  out.y.reserve(rows.size());
  for (std::size_t r : rows) out.y.push_back(y[r]);
  return out;
}

void write_labeled_csv(std::ostream& out, const LabeledSet& set) {
  for (const auto& n : set.feature_names) out << csv_escape(n) << ',';
  out << "SEVERITY\n";
  for (std::size_t r = 0; r < set.size(); ++r) {
    for (std::size_t c = 0; c < set.x.cols(); ++c) {
      const double v = set.x(r, c);
      if (!std::isnan(v)) out << format_double(v);
      out << ',';
    }
    out << set.y[r] << '\n';
  }
}

void write_labeled_csv(const std::string& path, const LabeledSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kUnreadableFile, "cannot write " + path);
  write_labeled_csv(out, set);
}

LabeledSet read_labeled_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kMissingHeader, "feature file has no header");
  auto header = split_csv_line(line);
  if (header.empty() || header.back() != "SEVERITY") {
    throw Error(ErrorCode::kMissingHeader, "feature file must end with a SEVERITY column");
  }
  LabeledSet set;
  set.feature_names.assign(header.begin(), header.end() - 1);
  set.x = Matrix(0, set.feature_names.size());
  std::vector<double> row(set.feature_names.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line.back() == '\r') line.pop_back();
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::kInvalidArgument, "line " + std::to_string(line_no) + ": wrong field count");
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      const auto& f = fields[c];
      if (f.empty()) {
        row[c] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), row[c]);
      if (ec != std::errc() || p != f.data() + f.size()) {
        throw Error(ErrorCode::kInvalidArgument, "line " + std::to_string(line_no) + ": bad number '" + f + "'");
      }
    }
    int label = 0;
    const auto& lf = fields.back();
    auto [p, ec] = std::from_chars(lf.data(), lf.data() + lf.size(), label);
    if (ec != std::errc() || p != lf.data() + lf.size()) {
      throw Error(ErrorCode::kInvalidArgument, "line " + std::to_string(line_no) + ": bad label");
    }
    set.x.append_row(row);
    set.y.push_back(label);
  }
  return set;
}

LabeledSet read_labeled_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kUnreadableFile, "cannot open " + path);
  return read_labeled_csv(in);
}

}  // namespace crashcast

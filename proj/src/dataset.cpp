#include "swm/dataset.hpp"

#include <array>
#include <fstream>

#include "swm/lexicon.hpp"
#include "swm/text.hpp"

namespace swm {

std::string_view source_op_name(SourceOp op) {
  static constexpr std::array<std::string_view, 6> names = {"none",          "replace1",    "replace2",
                                                            "swap-same-pos", "swap-random", "lm-gen"};
  return names[static_cast<std::size_t>(op)];
}

void write_dataset(std::ostream& out, const Dataset& data) {
  for (const auto& ex : data) out << ex.label << '\t' << text::join(ex.tokens) << '\n';
}

void save_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_dataset(out, data);
}

Dataset read_dataset(std::istream& in, const std::string& source) {
  Dataset data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(source, lineno, "expected label<TAB>tokens");
    const auto label = text::trim(std::string_view(line).substr(0, tab));
    LabeledExample ex;
    if (label == "1") {
      ex.label = 1;
    } else if (label == "0") {
      ex.label = 0;
    } else {
      throw ParseError(source, lineno, "label must be 0 or 1, got '" + std::string(label) + "'");
    }
    ex.tokens = text::tokenize(std::string_view(line).substr(tab + 1));
    if (ex.tokens.empty()) throw ParseError(source, lineno, "example has no tokens");
    ex.provenance = lineno;
    data.push_back(std::move(ex));
  }
  return data;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  return read_dataset(in, path);
}

SplitCounts count_labels(const Dataset& data) {
  SplitCounts c;
  for (const auto& ex : data) {
    ++c.total;
    (ex.label == 1 ? c.positive : c.negative)++;
  }
  return c;
}

void write_summary(std::ostream& out, const std::vector<std::pair<std::string, SplitCounts>>& rows) {
  out << "split\ttotal\tpositive\tnegative\n";
  for (const auto& [name, c] : rows) out << name << '\t' << c.total << '\t' << c.positive << '\t' << c.negative << '\n';
}

}  // namespace swm

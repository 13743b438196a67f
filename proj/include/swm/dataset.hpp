#pragma once

// Labeled rationality examples and their TSV form: `label<TAB>tok tok ...`.

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace swm {

enum class SourceOp { kNone, kReplace1, kReplace2, kSwapSamePos, kSwapRandom, kLmGen };

std::string_view source_op_name(SourceOp op);

struct LabeledExample {
  std::vector<std::string> tokens;
  int label = 1;  // 1 = rational, 0 = irrational
  SourceOp source = SourceOp::kNone;
  std::size_t provenance = 0;

  bool operator==(const LabeledExample&) const = default;
};

using Dataset = std::vector<LabeledExample>;

void write_dataset(std::ostream& out, const Dataset& data);
void save_dataset(const std::string& path, const Dataset& data);

/// Parses the TSV form. Source ops are not stored, so negatives read back as
/// SourceOp::kNone with label 0.
Dataset read_dataset(std::istream& in, const std::string& source = "<dataset>");
Dataset load_dataset(const std::string& path);

struct SplitCounts {
  std::size_t total = 0, positive = 0, negative = 0;
};

SplitCounts count_labels(const Dataset& data);

/// `split<TAB>total<TAB>positive<TAB>negative` rows with a header line.
void write_summary(std::ostream& out, const std::vector<std::pair<std::string, SplitCounts>>& rows);

}  // namespace swm

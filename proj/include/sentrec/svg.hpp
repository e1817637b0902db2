#pragma once

#include <string>
#include <vector>

namespace sentrec::svg {

// Minimal deterministic SVG emission: fixed canvas, fixed palette, all
// numbers formatted with %.6g so identical data yields identical bytes.

struct Series {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;  // same length as xs
};

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series);

// One column per bucket; each column stacks `part_labels.size()` shares
// (values in [0,1]; a column's shares should sum to at most 1).
struct StackedBars {
  std::vector<std::string> bucket_labels;
  std::vector<std::string> part_labels;
  std::vector<std::vector<double>> shares;  // [bucket][part]
};

std::string stacked_bar_chart(const std::string& title, const std::string& y_label,
                              const StackedBars& data);

}  // namespace sentrec::svg

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "dufo/pipeline.hpp"

namespace dufo {

/// Point-level confusion counts. Ground truth decides which total a point
/// joins; a point is "correct" when the predicted label matches.
struct Confusion {
  std::uint64_t static_correct = 0;
  std::uint64_t static_total = 0;
  std::uint64_t dynamic_correct = 0;
  std::uint64_t dynamic_total = 0;
};

/// Exact counts over two index-aligned label sequences. Throws
/// InvalidInputError naming the first mismatching scan on any misalignment.
Confusion confusion(const LabeledSequence& pred, const LabeledSequence& gt);

/// Accuracies in percent. A side with zero ground-truth points has no defined
/// accuracy and is reported absent; AA needs both sides.
struct Metrics {
  std::optional<double> sa;  ///< static accuracy
  std::optional<double> da;  ///< dynamic accuracy
  std::optional<double> aa;  ///< sqrt(sa * da)
};

Metrics compute_metrics(const Confusion& c);

/// Reporting convention: percentages are printed with 2 decimals.
double round2(double x);

/// "SA 97.96  DA 98.72  AA 98.34"; absent values print as "-".
std::string format_metrics(const Metrics& m);

}  // namespace dufo

#include "dufo/metrics.hpp"

#include <cmath>
#include <cstdio>

namespace dufo {

Confusion confusion(const LabeledSequence& pred, const LabeledSequence& gt) {
  if (pred.size() != gt.size()) {
    const std::size_t n = std::min(pred.size(), gt.size());
    const LabeledSequence& longer = pred.size() > gt.size() ? pred : gt;
    throw InvalidInputError("confusion: sequence lengths differ, first unmatched scan " +
                            std::to_string(longer[n].scan_id));
  }
  Confusion c;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    const ScanLabels& ps = pred[s];
    const ScanLabels& gs = gt[s];
    if (ps.scan_id != gs.scan_id)
      throw InvalidInputError("confusion: scan_id mismatch at position " +
                              std::to_string(s) + " (" + std::to_string(ps.scan_id) +
                              " vs " + std::to_string(gs.scan_id) + ")");
    if (ps.labels.size() != gs.labels.size() ||
        ps.retained_indices != gs.retained_indices)
      throw InvalidInputError("confusion: misaligned labels for scan " +
                              std::to_string(ps.scan_id));
    for (std::size_t i = 0; i < ps.labels.size(); ++i) {
      if (gs.labels[i] == PointLabel::Static) {
        ++c.static_total;
        if (ps.labels[i] == PointLabel::Static) ++c.static_correct;
      } else {
        ++c.dynamic_total;
        if (ps.labels[i] == PointLabel::Dynamic) ++c.dynamic_correct;
      }
    }
  }
  return c;
}

Metrics compute_metrics(const Confusion& c) {
  if (c.static_correct > c.static_total || c.dynamic_correct > c.dynamic_total)
    throw InvalidInputError("compute_metrics: correct count exceeds total");
  Metrics m;
  if (c.static_total > 0)
    m.sa = 100.0 * static_cast<double>(c.static_correct) /
           static_cast<double>(c.static_total);
  if (c.dynamic_total > 0)
    m.da = 100.0 * static_cast<double>(c.dynamic_correct) /
           static_cast<double>(c.dynamic_total);
  if (m.sa && m.da) m.aa = std::sqrt(*m.sa * *m.da);
  return m;
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

std::string format_metrics(const Metrics& m) {
  const auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", *v);
    return std::string(buf);
  };
  return "SA " + cell(m.sa) + "  DA " + cell(m.da) + "  AA " + cell(m.aa);
}

}  // namespace dufo

#include "fedgru/metrics.h"

#include <cmath>
#include <numeric>

#include "fedgru/errors.h"

namespace fedgru::metrics {

ConfusionCounts update_confusion(std::span<const detector::Verdict> verdicts,
                                 const GroundTruth& truth,
                                 ConfusionCounts counts) {
  for (const auto& v : verdicts) {
    const auto it = truth.find(v.vehicle_id);
    if (it == truth.end()) throw DataError("verdict for unknown vehicle " + v.vehicle_id);
    const bool attacked = it->second;
    if (v.flagged && attacked) ++counts.tp;
    else if (v.flagged) ++counts.fp;
    else if (attacked) ++counts.fn;
    else ++counts.tn;
  }
  return counts;
}

double accuracy(const ConfusionCounts& c) {
  if (c.total() == 0) throw MetricUndefined("accuracy undefined: no verdicts");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double detection_rate(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) throw MetricUndefined("detection rate undefined: no attacked samples");
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

double false_positive_rate(const ConfusionCounts& c) {
  if (c.fp + c.tn == 0) throw MetricUndefined("false positive rate undefined: no legitimate samples");
  return static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
}

double false_negative_rate(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) throw MetricUndefined("false negative rate undefined: no attacked samples");
  return static_cast<double>(c.fn) / static_cast<double>(c.tp + c.fn);
}

double mean_delay_difference(std::span<const double> predicted, std::span<const double> received) {
  if (predicted.size() != received.size()) throw StructuralError("mean_delay_difference: length mismatch");
  if (predicted.empty()) throw StructuralError("mean_delay_difference: empty sequence");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) s += std::abs(predicted[i] - received[i]);
  return s / static_cast<double>(predicted.size());
}

LossAggregate training_loss_aggregate(std::span<const double> losses) {
  if (losses.empty()) throw StructuralError("training_loss_aggregate: no losses");
  const double sum = std::accumulate(losses.begin(), losses.end(), 0.0);
  return {sum, sum / static_cast<double>(losses.size())};
}

}  // namespace fedgru::metrics

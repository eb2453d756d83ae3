#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "fedgru/detector.h"

namespace fedgru::metrics {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// vehicle id -> compromised
using GroundTruth = std::map<std::string, bool>;

// One count per vehicle-round verdict. Throws DataError for a verdict whose
// vehicle has no label.
ConfusionCounts update_confusion(std::span<const detector::Verdict> verdicts,
                                 const GroundTruth& truth,
                                 ConfusionCounts counts = {});

// Each rate throws MetricUndefined when its denominator is zero.
double accuracy(const ConfusionCounts& c);             // (TP+TN)/total
double detection_rate(const ConfusionCounts& c);       // TP/(TP+FN)
double false_positive_rate(const ConfusionCounts& c);  // FP/(FP+TN)
double false_negative_rate(const ConfusionCounts& c);  // FN/(FN+TP)

// Mean |pred_i - rcv_i| in ms.
double mean_delay_difference(std::span<const double> predicted, std::span<const double> received);

struct LossAggregate {
  double sum = 0.0;
  double mean = 0.0;
};

// Sum of per-series losses, plus their mean for plotting.
LossAggregate training_loss_aggregate(std::span<const double> losses);

}  // namespace fedgru::metrics

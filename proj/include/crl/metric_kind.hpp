#pragma once

#include <string>

namespace crl {

enum class MetricKind {
  Rouge1,
  Rouge2,
  RougeL,
  RougeMean,
  BartLike,
  DaeLike,
};

// Reference-free metrics score against the source document; reference-based
// metrics score against the reference summary.
constexpr bool reference_free(MetricKind kind) {
  return kind == MetricKind::BartLike || kind == MetricKind::DaeLike;
}

std::string to_string(MetricKind kind);
MetricKind metric_from_string(const std::string& name);

struct MetricScore {
  MetricKind kind = MetricKind::RougeMean;
  double value = 0.0;
};

}  // namespace crl

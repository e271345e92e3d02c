#pragma once

#include <stdexcept>

#include "fedtrust/dataset.hpp"
#include "fedtrust/model.hpp"

namespace fedtrust {

enum class ElapsedVerdict { Ok, Lazy };
enum class RoniVerdict { Accept, Reject };

// Proof-of-elapsed-time stand-in: local compute time must be proportional to
// the claimed data size. A worker is lazy iff it reports less time than the
// rate model allows, minus the tolerance slack.
inline ElapsedVerdict elapsed_check(const LocalUpdate& update, double compute_rate_ms,
                                    double tolerance) {
  if (compute_rate_ms <= 0.0) throw std::invalid_argument("compute rate must be positive");
  if (!(tolerance > 0.0 && tolerance < 1.0))
    throw std::invalid_argument("tolerance must be in (0,1)");
  const double required =
      compute_rate_ms * static_cast<double>(update.claimed_data_size) * (1.0 - tolerance);
  return update.claimed_elapsed_ms < required ? ElapsedVerdict::Lazy : ElapsedVerdict::Ok;
}

// Reject-on-negative-influence: reject an update iff applying it drops
// validation accuracy by more than epsilon.
inline RoniVerdict roni_filter(const ModelState& global, const LocalUpdate& update,
                               const Dataset& validation, double epsilon) {
  if (validation.size() == 0) throw empty_shard("roni_filter: empty validation set");
  if (epsilon < 0.0) throw std::invalid_argument("epsilon must be non-negative");
  ModelState with_update = global;
  with_update += update.delta;
  const double acc_with = evaluate(with_update, validation);
  const double acc_without = evaluate(global, validation);
  return (acc_with - acc_without < -epsilon) ? RoniVerdict::Reject : RoniVerdict::Accept;
}

}  // namespace fedtrust

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fedtrust {

// Subjective-logic opinion algebra. A task publisher's view of a worker is a
// (belief, distrust, uncertainty) triple on the unit simplex; local opinions
// are formed from weighted interaction histories, recommendations are fused
// by weighted arithmetic mean, and local + recommended views combine through
// the consensus operator.

inline constexpr double kSimplexTolerance = 1e-9;

struct Opinion {
  double belief = 0.0;
  double distrust = 0.0;
  double uncertainty = 1.0;

  bool valid() const {
    auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    return in_unit(belief) && in_unit(distrust) && in_unit(uncertainty) &&
           std::fabs(belief + distrust + uncertainty - 1.0) <= kSimplexTolerance;
  }

  bool vacuous() const { return belief == 0.0 && distrust == 0.0 && uncertainty == 1.0; }

  static Opinion make_vacuous() { return Opinion{0.0, 0.0, 1.0}; }
};

enum class Outcome : uint8_t { Positive, Negative };

// One publisher<->worker training-task outcome. task_index is the simulated
// clock; link_failure_prob is the packet-loss probability sampled for that
// task.
struct InteractionRecord {
  std::string publisher_id;
  std::string worker_id;
  uint64_t task_index = 0;
  Outcome outcome = Outcome::Positive;
  double link_failure_prob = 0.0;
};

struct WeightConfig {
  double gamma = 0.5;          // uncertainty effect on the reputation value
  double w_recent = 0.8;       // timeliness weights, w_recent + w_past = 1
  double w_past = 0.2;
  double rho_pos = 0.4;        // effect weights for positive/negative events
  double rho_neg = 0.6;
  uint64_t recency_window = 3; // task-index span counted as "recent"

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in [0,1]");
    if (!(w_recent >= 0.0 && w_past >= 0.0))
      throw std::invalid_argument("timeliness weights must be non-negative");
    if (std::fabs(w_recent + w_past - 1.0) > kSimplexTolerance)
      throw std::invalid_argument("w_recent + w_past must equal 1");
    if (!(rho_pos > 0.0 && rho_neg > 0.0))
      throw std::invalid_argument("effect weights must be positive");
    if (recency_window == 0) throw std::invalid_argument("recency_window must be positive");
  }

  // Degenerate point with no recency/effect differentiation; paired with
  // uniform recommender weights this is the traditional-subjective-logic
  // baseline.
  static WeightConfig traditional(double gamma_value = 0.5) {
    return WeightConfig{gamma_value, 0.5, 0.5, 1.0, 1.0, 3};
  }
};

struct ReputationScore {
  std::string worker_id;
  double value = 0.5;
  Opinion opinion;
  uint64_t computed_at = 0;
};

struct EffectiveCounts {
  double alpha = 0.0;  // weighted positive evidence
  double beta = 0.0;   // weighted negative evidence
};

// Folds timeliness and effect weights into effective event counts:
//   alpha = rho_pos * (w_recent * #pos_recent + w_past * #pos_past)
// and symmetrically for beta. A record is recent iff now - task_index is
// inside the recency window.
inline EffectiveCounts weighted_counts(std::span<const InteractionRecord> records,
                                       uint64_t now, const WeightConfig& cfg) {
  uint64_t pos_recent = 0, pos_past = 0, neg_recent = 0, neg_past = 0;
  for (const auto& r : records) {
    const bool recent = now - r.task_index < cfg.recency_window;
    if (r.outcome == Outcome::Positive) {
      (recent ? pos_recent : pos_past) += 1;
    } else {
      (recent ? neg_recent : neg_past) += 1;
    }
  }
  EffectiveCounts c;
  c.alpha = cfg.rho_pos * (cfg.w_recent * static_cast<double>(pos_recent) +
                           cfg.w_past * static_cast<double>(pos_past));
  c.beta = cfg.rho_neg * (cfg.w_recent * static_cast<double>(neg_recent) +
                          cfg.w_past * static_cast<double>(neg_past));
  return c;
}

// Opinion from effective counts and a link-failure probability u:
//   b = (1-u) * alpha / (alpha + beta),  d = (1-u) * beta / (alpha + beta).
// No evidence yields the vacuous opinion (0, 0, 1).
inline Opinion opinion_from_counts(const EffectiveCounts& counts, double link_failure) {
  const double total = counts.alpha + counts.beta;
  if (total == 0.0) return Opinion::make_vacuous();
  Opinion op;
  op.uncertainty = link_failure;
  op.belief = (1.0 - link_failure) * counts.alpha / total;
  op.distrust = (1.0 - link_failure) * counts.beta / total;
  return op;
}

inline Opinion local_opinion(std::span<const InteractionRecord> records, uint64_t now,
                             const WeightConfig& cfg, double link_failure) {
  return opinion_from_counts(weighted_counts(records, now, cfg), link_failure);
}

// Mean of the per-record link-failure samples; the uncertainty source for an
// opinion over that history.
inline double mean_link_failure(std::span<const InteractionRecord> records) {
  if (records.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : records) sum += r.link_failure_prob;
  return sum / static_cast<double>(records.size());
}

inline Opinion local_opinion(std::span<const InteractionRecord> records, uint64_t now,
                             const WeightConfig& cfg) {
  return local_opinion(records, now, cfg, mean_link_failure(records));
}

// Scalar reputation T = b + gamma * u.
inline double reputation_value(const Opinion& op, double gamma) {
  return op.belief + gamma * op.uncertainty;
}

// Familiarity discount for a recommender: the ratio of its interaction count
// with this worker to its average count with other workers, clamped to [0,1].
// No basis for discounting (mean 0) keeps full weight.
inline double frequency_weight(double n_with_worker, double mean_with_others) {
  if (mean_with_others <= 0.0) return 1.0;
  const double ratio = n_with_worker / mean_with_others;
  return ratio > 1.0 ? 1.0 : ratio;
}

// Component-wise weighted arithmetic mean of recommended opinions. Empty
// result means all weights were zero and the caller should fall back to its
// local opinion alone.
inline std::optional<Opinion> fuse_recommended(
    std::span<const std::pair<Opinion, double>> opinions) {
  double total = 0.0;
  for (const auto& [op, w] : opinions) {
    if (w < 0.0) throw std::invalid_argument("recommendation weight must be non-negative");
    total += w;
  }
  if (total == 0.0) return std::nullopt;
  Opinion fused{0.0, 0.0, 0.0};
  for (const auto& [op, w] : opinions) {
    fused.belief += w * op.belief;
    fused.distrust += w * op.distrust;
    fused.uncertainty += w * op.uncertainty;
  }
  fused.belief /= total;
  fused.distrust /= total;
  fused.uncertainty /= total;
  return fused;
}

// Consensus of two independent opinions:
//   kappa = u_L + u_R - u_L*u_R
//   b = (b_L*u_R + b_R*u_L) / kappa, d likewise, u = u_L*u_R / kappa.
// The vacuous opinion is the neutral element and is returned-through exactly.
// When both uncertainties are zero (kappa = 0) the consensus is undefined and
// the unweighted arithmetic mean is used instead.
inline Opinion combine_opinions(const Opinion& local, const Opinion& recommended) {
  if (recommended.vacuous()) return local;
  if (local.vacuous()) return recommended;
  const double kappa =
      local.uncertainty + recommended.uncertainty - local.uncertainty * recommended.uncertainty;
  if (kappa == 0.0) {
    return Opinion{(local.belief + recommended.belief) / 2.0,
                   (local.distrust + recommended.distrust) / 2.0,
                   (local.uncertainty + recommended.uncertainty) / 2.0};
  }
  Opinion out;
  out.belief = (local.belief * recommended.uncertainty + recommended.belief * local.uncertainty) / kappa;
  out.distrust =
      (local.distrust * recommended.uncertainty + recommended.distrust * local.uncertainty) / kappa;
  out.uncertainty = (local.uncertainty * recommended.uncertainty) / kappa;
  return out;
}

}  // namespace fedtrust

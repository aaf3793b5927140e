#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "psim/measure.hpp"
#include "psim/model.hpp"
#include "psim/rng.hpp"
#include "psim/types.hpp"

namespace psim {

enum class EventKind { TypeChange, PairInteraction, Marketmaker };

// One accepted jump. Single-agent events leave j = -1.
template <class T>
struct Event {
  double time;
  EventKind kind;
  std::int32_t i;
  std::int32_t j;
  T before_i, after_i;
  T before_j, after_j;
};

// Piecewise-constant path of the N-agent process between accepted events.
// `candidate_count` counts every thinning proposal, accepted or not.
template <class T>
struct Trajectory {
  TypeSpace space;
  std::vector<T> initial;
  double t_final = 0;
  std::vector<Event<T>> events;
  std::uint64_t candidate_count = 0;

  int n_agents() const { return static_cast<int>(initial.size()); }

  std::vector<T> types_at_end() const {
    std::vector<T> types = initial;
    for (const auto& e : events) {
      types[static_cast<std::size_t>(e.i)] = e.after_i;
      if (e.j >= 0) types[static_cast<std::size_t>(e.j)] = e.after_j;
    }
    return types;
  }
};

bool operator==(const Event<int>& a, const Event<int>& b);
bool operator==(const Trajectory<int>& a, const Trajectory<int>& b);

// Exact event-driven simulation of the N-agent jump process by thinning:
// candidates arrive at the constant total rate N*gamma_bar + N*lambda_bar +
// sum of channel bounds; a candidate picks its channel proportionally to
// rate, draws agents uniformly (ordered pairs include i = j, which are null
// at the agent level), and is accepted with probability rate/bound. Rates
// evaluated above their declared bound are a hard error.
class FiniteEngine {
 public:
  FiniteEngine(const FiniteModel& model, std::vector<int> types, RngStream rng);

  struct StepOutcome {
    bool accepted = false;
    Event<int> event{};  // valid only when accepted
  };

  // Advances past one candidate. Returns nullopt (and clamps time to t_max)
  // when the next candidate falls beyond the horizon.
  std::optional<StepOutcome> step(double t_max);

  double time() const { return time_; }
  const std::vector<int>& types() const { return types_; }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  std::int64_t n_agents() const { return static_cast<std::int64_t>(types_.size()); }
  std::uint64_t candidate_count() const { return candidates_; }
  std::uint64_t accepted_count() const { return accepted_; }
  double total_candidate_rate() const { return total_rate_; }
  MassView view() const { return MassView(counts_.data(), static_cast<int>(counts_.size()), n_agents()); }

  // Exact-count representation of the current empirical measure.
  EmpiricalMeasure measure() const { return EmpiricalMeasure::from_counts(model_->space, counts_); }

 private:
  void apply_single(int agent, int new_type);
  int sample_agent_with_label(int label, RngStream& rng);
  int sample_from_probs(const double* probs, int k, double u) const;

  const FiniteModel* model_;
  std::vector<int> types_;
  std::vector<std::int64_t> counts_;
  std::vector<std::vector<int>> buckets_;  // agent ids per label; kept only with channels
  std::vector<int> bucket_pos_;
  bool use_buckets_ = false;
  RngStream rng_;
  double time_ = 0;
  double total_rate_ = 0;
  double gamma_slice_ = 0;   // N * gamma_bar
  double lambda_slice_ = 0;  // N * lambda_bar
  std::vector<double> channel_bounds_;
  std::uint64_t candidates_ = 0;
  std::uint64_t accepted_ = 0;
  std::vector<double> aprob_buf_;
  std::vector<PairOutcome> bbuf_;
};

Trajectory<int> run_trajectory(const FiniteModel& model, const std::vector<int>& init, double T,
                               RngStream rng);

// Exact-count measure snapshots at the requested times (right-continuous).
std::vector<std::vector<std::int64_t>> run_sampled_counts(const FiniteModel& model,
                                                          const std::vector<int>& init, double T,
                                                          const std::vector<double>& times,
                                                          RngStream rng);

std::vector<std::int64_t> run_final_counts(const FiniteModel& model, const std::vector<int>& init,
                                           double T, RngStream rng);

// Real-line variant (pairwise-additive dynamics).
Trajectory<double> run_trajectory(const PercolationModel& model, const std::vector<double>& init,
                                  double T, RngStream rng);

std::vector<double> run_final_types(const PercolationModel& model, const std::vector<double>& init,
                                    double T, RngStream rng);

// Discrete-time Euler scheme on the generator, used only as a cross-check
// oracle: each slot of length dt fires each candidate transition with
// probability rate*dt, applying at most the first by enumeration order.
// Requires the worst-case one-slot jump probability to be <= 0.1.
Trajectory<int> oracle_discrete_time(const FiniteModel& model, const std::vector<int>& init,
                                     double T, double dt, RngStream rng);

// N independent draws from nu0 (product initial condition).
std::vector<int> sample_product_labels(const Eigen::VectorXd& nu0, int n_agents, RngStream& rng);
std::vector<double> sample_product_gaussian(double mean, double sd, int n_agents, RngStream& rng);

// Counts replay: walks a finite trajectory and reports exact counts at the
// given times (right-continuous value, i.e. after any event at that instant).
std::vector<std::vector<std::int64_t>> counts_at_times(const Trajectory<int>& traj,
                                                       const std::vector<double>& times);

std::vector<std::int64_t> counts_of(const TypeSpace& space, const std::vector<int>& types);

}  // namespace psim

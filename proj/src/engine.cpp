#include "psim/engine.hpp"

#include <algorithm>
#include <cmath>

namespace psim {

namespace {

constexpr double kBoundSlack = 1 + 1e-9;

void check_rate(double value, double bound, const char* what) {
  if (!(value >= 0) || !std::isfinite(value))
    throw BoundViolation(std::string(what) + ": rate evaluated to a non-finite or negative value");
  if (value > bound * kBoundSlack)
    throw BoundViolation(std::string(what) + ": rate exceeds its declared bound");
}

}  // namespace

bool operator==(const Event<int>& a, const Event<int>& b) {
  return a.time == b.time && a.kind == b.kind && a.i == b.i && a.j == b.j &&
         a.before_i == b.before_i && a.after_i == b.after_i && a.before_j == b.before_j &&
         a.after_j == b.after_j;
}

bool operator==(const Trajectory<int>& a, const Trajectory<int>& b) {
  return a.space == b.space && a.initial == b.initial && a.t_final == b.t_final &&
         a.candidate_count == b.candidate_count && a.events == b.events;
}

std::vector<std::int64_t> counts_of(const TypeSpace& space, const std::vector<int>& types) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(space.size()), 0);
  for (int t : types) {
    if (t < 0 || t >= space.size()) throw ConfigError("agent type outside the label space");
    ++counts[static_cast<std::size_t>(t)];
  }
  return counts;
}

FiniteEngine::FiniteEngine(const FiniteModel& model, std::vector<int> types, RngStream rng)
    : model_(&model), types_(std::move(types)), rng_(rng) {
  if (types_.empty()) throw ConfigError("engine: N must be >= 1");
  counts_ = counts_of(model.space, types_);
  const double n = static_cast<double>(types_.size());
  gamma_slice_ = n * model.gamma_bar;
  lambda_slice_ = n * model.lambda_bar;
  total_rate_ = gamma_slice_ + lambda_slice_;
  for (const auto& c : model.channels) {
    const double b = c.rate_bound(n_agents());
    if (!(b >= 0) || !std::isfinite(b)) throw ConfigError("engine: channel bound must be finite");
    channel_bounds_.push_back(b);
    total_rate_ += b;
  }
  if (!(total_rate_ > 0))
    throw ConfigError("engine: zero total candidate rate (no dynamics declared)");
  use_buckets_ = !model.channels.empty();
  if (use_buckets_) {
    buckets_.assign(static_cast<std::size_t>(model.space.size()), {});
    bucket_pos_.resize(types_.size());
    for (std::size_t a = 0; a < types_.size(); ++a) {
      auto& bucket = buckets_[static_cast<std::size_t>(types_[a])];
      bucket_pos_[a] = static_cast<int>(bucket.size());
      bucket.push_back(static_cast<int>(a));
    }
  }
  aprob_buf_.resize(static_cast<std::size_t>(model.space.size()));
}

void FiniteEngine::apply_single(int agent, int new_type) {
  const int old_type = types_[static_cast<std::size_t>(agent)];
  if (old_type == new_type) return;
  --counts_[static_cast<std::size_t>(old_type)];
  ++counts_[static_cast<std::size_t>(new_type)];
  types_[static_cast<std::size_t>(agent)] = new_type;
  if (use_buckets_) {
    auto& old_bucket = buckets_[static_cast<std::size_t>(old_type)];
    const int pos = bucket_pos_[static_cast<std::size_t>(agent)];
    const int last = old_bucket.back();
    old_bucket[static_cast<std::size_t>(pos)] = last;
    bucket_pos_[static_cast<std::size_t>(last)] = pos;
    old_bucket.pop_back();
    auto& new_bucket = buckets_[static_cast<std::size_t>(new_type)];
    bucket_pos_[static_cast<std::size_t>(agent)] = static_cast<int>(new_bucket.size());
    new_bucket.push_back(agent);
  }
}

int FiniteEngine::sample_agent_with_label(int label, RngStream& rng) {
  const auto& bucket = buckets_[static_cast<std::size_t>(label)];
  if (bucket.empty()) throw BoundViolation("engine: channel fired with an empty source label");
  return bucket[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(bucket.size())))];
}

int FiniteEngine::sample_from_probs(const double* probs, int k, double u) const {
  double cum = 0;
  int last_positive = -1;
  for (int i = 0; i < k; ++i) {
    if (probs[i] <= 0) continue;
    last_positive = i;
    cum += probs[i];
    if (u < cum) return i;
  }
  if (last_positive < 0) throw ConfigError("engine: sampling from an empty distribution");
  return last_positive;
}

std::optional<FiniteEngine::StepOutcome> FiniteEngine::step(double t_max) {
  const double holding = rng_.exponential(total_rate_);
  if (time_ + holding > t_max) {
    time_ = t_max;
    return std::nullopt;
  }
  time_ += holding;
  ++candidates_;

  StepOutcome out;
  const int n = static_cast<int>(types_.size());
  double pick = rng_.uniform01() * total_rate_;

  if (pick < gamma_slice_) {
    const int i = rng_.uniform_int(n);
    const int w = types_[static_cast<std::size_t>(i)];
    const double g = model_->gamma(w, view());
    check_rate(g, model_->gamma_bar, "gamma");
    const double u = rng_.uniform01();
    if (u * model_->gamma_bar < g) {
      model_->a_probs(w, view(), aprob_buf_.data());
      const int wp =
          sample_from_probs(aprob_buf_.data(), static_cast<int>(aprob_buf_.size()), rng_.uniform01());
      out.accepted = true;
      out.event = {time_, EventKind::TypeChange, i, -1, w, wp, -1, -1};
      apply_single(i, wp);
      ++accepted_;
    }
    return out;
  }
  pick -= gamma_slice_;

  if (pick < lambda_slice_) {
    const int i = rng_.uniform_int(n);
    const int j = rng_.uniform_int(n);
    if (i == j) return out;  // diagonal proposals are null at the agent level
    const int w1 = types_[static_cast<std::size_t>(i)];
    const int w2 = types_[static_cast<std::size_t>(j)];
    const double l = model_->lambda_engine(w1, w2, view());
    check_rate(l, model_->lambda_bar, "lambda");
    const double u = rng_.uniform01();
    if (u * model_->lambda_bar < l) {
      model_->b_support(w1, w2, view(), bbuf_);
      if (bbuf_.empty()) throw ConfigError("engine: pair kernel has no outcomes at positive rate");
      const double ub = rng_.uniform01();
      double cum = 0;
      std::size_t chosen = bbuf_.size() - 1;
      for (std::size_t o = 0; o < bbuf_.size(); ++o) {
        cum += bbuf_[o].prob;
        if (ub < cum) {
          chosen = o;
          break;
        }
      }
      const auto& oc = bbuf_[chosen];
      out.accepted = true;
      out.event = {time_, EventKind::PairInteraction, i, j, w1, oc.w1_new, w2, oc.w2_new};
      apply_single(i, oc.w1_new);
      apply_single(j, oc.w2_new);
      ++accepted_;
    }
    return out;
  }
  pick -= lambda_slice_;

  for (std::size_t c = 0; c < channel_bounds_.size(); ++c) {
    if (pick >= channel_bounds_[c] && c + 1 < channel_bounds_.size()) {
      pick -= channel_bounds_[c];
      continue;
    }
    const auto& channel = model_->channels[c];
    const double r = channel.rate(view(), n_agents());
    check_rate(r, channel_bounds_[c], "channel");
    const double u = rng_.uniform01();
    if (u * channel_bounds_[c] < r) {
      const ChannelMove move = channel.sample_move(view(), rng_);
      const int i = sample_agent_with_label(move.from1, rng_);
      const int j = sample_agent_with_label(move.from2, rng_);
      out.accepted = true;
      out.event = {time_, EventKind::Marketmaker, i, j, move.from1, move.to1, move.from2, move.to2};
      apply_single(i, move.to1);
      apply_single(j, move.to2);
      ++accepted_;
    }
    return out;
  }
  return out;
}

Trajectory<int> run_trajectory(const FiniteModel& model, const std::vector<int>& init, double T,
                               RngStream rng) {
  if (T < 0) throw ConfigError("run_trajectory: T must be >= 0");
  Trajectory<int> traj;
  traj.space = model.space;
  traj.initial = init;
  traj.t_final = T;
  counts_of(model.space, init);  // validates membership

  const double n = static_cast<double>(init.size());
  double total = n * model.gamma_bar + n * model.lambda_bar;
  for (const auto& c : model.channels) total += c.rate_bound(static_cast<std::int64_t>(init.size()));
  if (!(total > 0) || T == 0) return traj;  // no events possible; path is constant on [0,T]

  FiniteEngine engine(model, init, rng);
  while (auto step = engine.step(T)) {
    if (step->accepted) traj.events.push_back(step->event);
  }
  traj.candidate_count = engine.candidate_count();
  return traj;
}

std::vector<std::vector<std::int64_t>> counts_at_times(const Trajectory<int>& traj,
                                                       const std::vector<double>& times) {
  for (std::size_t i = 0; i + 1 < times.size(); ++i)
    if (times[i] > times[i + 1]) throw ConfigError("counts_at_times: times must be nondecreasing");
  if (!times.empty() && (times.front() < 0 || times.back() > traj.t_final + 1e-12))
    throw ConfigError("counts_at_times: time beyond the trajectory horizon");

  std::vector<std::vector<std::int64_t>> out;
  out.reserve(times.size());
  std::vector<std::int64_t> cur = counts_of(traj.space, traj.initial);
  std::size_t ti = 0;
  for (const auto& e : traj.events) {
    while (ti < times.size() && times[ti] < e.time) {
      out.push_back(cur);
      ++ti;
    }
    --cur[static_cast<std::size_t>(e.before_i)];
    ++cur[static_cast<std::size_t>(e.after_i)];
    if (e.j >= 0) {
      --cur[static_cast<std::size_t>(e.before_j)];
      ++cur[static_cast<std::size_t>(e.after_j)];
    }
  }
  while (ti < times.size()) {
    out.push_back(cur);
    ++ti;
  }
  return out;
}

std::vector<std::vector<std::int64_t>> run_sampled_counts(const FiniteModel& model,
                                                          const std::vector<int>& init, double T,
                                                          const std::vector<double>& times,
                                                          RngStream rng) {
  return counts_at_times(run_trajectory(model, init, T, rng), times);
}

std::vector<std::int64_t> run_final_counts(const FiniteModel& model, const std::vector<int>& init,
                                           double T, RngStream rng) {
  const double n = static_cast<double>(init.size());
  double total = n * model.gamma_bar + n * model.lambda_bar;
  for (const auto& c : model.channels) total += c.rate_bound(static_cast<std::int64_t>(init.size()));
  if (!(total > 0) || T == 0) return counts_of(model.space, init);
  FiniteEngine engine(model, init, rng);
  while (engine.step(T)) {
  }
  return engine.counts();
}

Trajectory<double> run_trajectory(const PercolationModel& model, const std::vector<double>& init,
                                  double T, RngStream rng) {
  if (T < 0) throw ConfigError("run_trajectory: T must be >= 0");
  for (double x : init)
    if (!std::isfinite(x)) throw ConfigError("run_trajectory: initial types must be finite");
  Trajectory<double> traj;
  traj.space = model.space;
  traj.initial = init;
  traj.t_final = T;
  if (init.empty()) throw ConfigError("run_trajectory: N must be >= 1");

  const int n = static_cast<int>(init.size());
  const double total = static_cast<double>(n) * model.meeting_rate;
  if (!(total > 0) || T == 0) return traj;

  std::vector<double> types = init;
  double t = 0;
  while (true) {
    t += rng.exponential(total);
    if (t > T) break;
    ++traj.candidate_count;
    const int i = rng.uniform_int(n);
    const int j = rng.uniform_int(n);
    if (i == j) continue;  // null at the agent level
    const double sum = types[static_cast<std::size_t>(i)] + types[static_cast<std::size_t>(j)];
    traj.events.push_back({t, EventKind::PairInteraction, i, j, types[static_cast<std::size_t>(i)],
                           sum, types[static_cast<std::size_t>(j)], sum});
    types[static_cast<std::size_t>(i)] = sum;
    types[static_cast<std::size_t>(j)] = sum;
  }
  return traj;
}

std::vector<double> run_final_types(const PercolationModel& model, const std::vector<double>& init,
                                    double T, RngStream rng) {
  return run_trajectory(model, init, T, rng).types_at_end();
}

Trajectory<int> oracle_discrete_time(const FiniteModel& model, const std::vector<int>& init,
                                     double T, double dt, RngStream rng) {
  if (!(dt > 0)) throw ConfigError("oracle: dt must be > 0");
  const double n = static_cast<double>(init.size());
  double worst = n * model.gamma_bar + (n - 1) * model.lambda_bar;
  for (const auto& c : model.channels) worst += c.rate_bound(static_cast<std::int64_t>(init.size()));
  if (worst * dt > 0.1 + 1e-12)
    throw ConfigError("oracle: dt too large (one-step jump probability above 0.1)");
  const auto slots = static_cast<std::int64_t>(std::llround(T / dt));
  if (std::abs(static_cast<double>(slots) * dt - T) > 1e-6 * dt)
    throw ConfigError("oracle: T must be a multiple of dt");

  Trajectory<int> traj;
  traj.space = model.space;
  traj.initial = init;
  traj.t_final = T;

  const int N = static_cast<int>(init.size());
  std::vector<int> types = init;
  std::vector<std::int64_t> counts = counts_of(model.space, init);
  const int k = model.space.size();
  std::vector<PairOutcome> bbuf;

  const bool pair_dynamics = model.has_pair_dynamics();
  for (std::int64_t s = 0; s < slots; ++s) {
    const double t_event = static_cast<double>(s + 1) * dt;
    const MassView nu(counts.data(), k, N);
    bool fired = false;
    for (int i = 0; i < N && !fired; ++i) {
      const int w = types[static_cast<std::size_t>(i)];
      const double g = model.gamma(w, nu);
      check_rate(g, model.gamma_bar, "gamma");
      if (rng.uniform01() < g * dt) {
        std::vector<double> probs(static_cast<std::size_t>(k));
        model.a_probs(w, nu, probs.data());
        double u = rng.uniform01();
        double cum = 0;
        int wp = w;
        for (int c = 0; c < k; ++c) {
          cum += probs[static_cast<std::size_t>(c)];
          if (u < cum) {
            wp = c;
            break;
          }
        }
        traj.events.push_back({t_event, EventKind::TypeChange, i, -1, w, wp, -1, -1});
        --counts[static_cast<std::size_t>(w)];
        ++counts[static_cast<std::size_t>(wp)];
        types[static_cast<std::size_t>(i)] = wp;
        fired = true;
      }
    }
    if (fired || !pair_dynamics) continue;
    // Full mathematical pair rate lambda/N per ordered pair, i != j; this
    // includes any aggregate-channel share, so channels are not re-added.
    for (int i = 0; i < N && !fired; ++i) {
      for (int j = 0; j < N && !fired; ++j) {
        if (i == j) continue;
        const int w1 = types[static_cast<std::size_t>(i)];
        const int w2 = types[static_cast<std::size_t>(j)];
        const double l = model.lambda(w1, w2, nu);
        if (!(l >= 0) || !std::isfinite(l))
          throw BoundViolation("oracle: pair rate evaluated to a non-finite or negative value");
        if (rng.uniform01() < l / n * dt) {
          model.b_support(w1, w2, nu, bbuf);
          if (bbuf.empty()) throw ConfigError("oracle: pair kernel has no outcomes at positive rate");
          double u = rng.uniform01();
          double cum = 0;
          std::size_t chosen = bbuf.size() - 1;
          for (std::size_t o = 0; o < bbuf.size(); ++o) {
            cum += bbuf[o].prob;
            if (u < cum) {
              chosen = o;
              break;
            }
          }
          const auto& oc = bbuf[chosen];
          traj.events.push_back({t_event, EventKind::PairInteraction, i, j, w1, oc.w1_new, w2, oc.w2_new});
          --counts[static_cast<std::size_t>(w1)];
          ++counts[static_cast<std::size_t>(oc.w1_new)];
          --counts[static_cast<std::size_t>(w2)];
          ++counts[static_cast<std::size_t>(oc.w2_new)];
          types[static_cast<std::size_t>(i)] = oc.w1_new;
          types[static_cast<std::size_t>(j)] = oc.w2_new;
          fired = true;
        }
      }
    }
  }
  return traj;
}

std::vector<int> sample_product_labels(const Eigen::VectorXd& nu0, int n_agents, RngStream& rng) {
  if (n_agents < 1) throw ConfigError("sample_product: N must be >= 1");
  double total = 0;
  for (Eigen::Index i = 0; i < nu0.size(); ++i) {
    if (!(nu0[i] >= -1e-15)) throw ConfigError("sample_product: negative probability");
    total += nu0[i];
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("sample_product: distribution must sum to 1");
  std::vector<int> types(static_cast<std::size_t>(n_agents));
  const int k = static_cast<int>(nu0.size());
  for (auto& t : types) {
    const double u = rng.uniform01() * total;
    double cum = 0;
    t = k - 1;
    for (int i = 0; i < k; ++i) {
      cum += nu0[i];
      if (u < cum) {
        t = i;
        break;
      }
    }
  }
  return types;
}

std::vector<double> sample_product_gaussian(double mean, double sd, int n_agents, RngStream& rng) {
  if (n_agents < 1) throw ConfigError("sample_product: N must be >= 1");
  if (!(sd >= 0)) throw ConfigError("sample_product: sd must be >= 0");
  std::vector<double> types(static_cast<std::size_t>(n_agents));
  for (auto& t : types) t = mean + sd * rng.normal();
  return types;
}

}  // namespace psim

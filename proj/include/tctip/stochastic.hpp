#ifndef TCTIP_STOCHASTIC_HPP
#define TCTIP_STOCHASTIC_HPP

// Additive-noise model with reflecting boundaries. The SDE is integrated on the
// whole plane with an odd extension of the drift, and physical states are
// recovered componentwise as (|v|, |m|).

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "tctip/manifolds.hpp"
#include "tctip/model.hpp"
#include "tctip/rate_tipping.hpp"

namespace tctip {

struct NoiseSpec {
  double sigma1 = 0.005;
  double sigma2 = 0.005;
  std::uint64_t seed = 1;
  double dt = 0.1;
  double tau_f = 1e6;
  int store_every = 10;  // decimation of stored paths; detection uses every step

  void validate() const;
};

// kComponentwise: f^ = sign(v) f(|v|, |m|), g^ = sign(m) g(|v|, |m|), which
// makes (|v|, |m|) a reflected solution. kAsPrinted uses sign(v) for both
// components; it agrees with kComponentwise whenever v and m have the same
// sign and reverses the m-drift otherwise.
enum class ReflectionConvention { kComponentwise, kAsPrinted };

// Zero coordinates use the first-quadrant formula.
template <typename Derived>
StateT<typename Derived::Scalar> reflected_field(
    const Eigen::MatrixBase<Derived>& x, const ModelParams& p,
    ReflectionConvention conv = ReflectionConvention::kComponentwise) {
  using Scalar = typename Derived::Scalar;
  const Scalar av = x(0) < Scalar(0) ? -x(0) : x(0);
  const Scalar am = x(1) < Scalar(0) ? -x(1) : x(1);
  const Scalar sv = x(0) < Scalar(0) ? Scalar(-1) : Scalar(1);
  const Scalar sm = x(1) < Scalar(0) ? Scalar(-1) : Scalar(1);
  const Scalar gs = conv == ReflectionConvention::kComponentwise ? sm : sv;
  return StateT<Scalar>(sv * drift_v(av, am, p), gs * drift_m(av, am, p));
}

template <typename Derived>
StateT<typename Derived::Scalar> reflect(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseAbs();
}

// Seed of stream `component` of realization `realization`: a SplitMix64 hash
// of the triple, so every stream is a pure function of its indices.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t realization, std::uint64_t component);

class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t realization, std::uint64_t component)
      : engine_(stream_seed(seed, realization, component)) {}
  double operator()() { return dist_(engine_); }

 private:
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> dist_;
};

// One Euler-Maruyama step with standard normal draws xi1, xi2.
inline State euler_maruyama_step(const State& x, const ModelParams& p, double dt, double xi1,
                                 double xi2, double sigma1, double sigma2,
                                 ReflectionConvention conv = ReflectionConvention::kComponentwise) {
  const double sq = std::sqrt(dt);
  return x + dt * reflected_field(x, p, conv) + State(sigma1 * sq * xi1, sigma2 * sq * xi2);
}

enum class TipKind { kOtoS, kStoO };
std::string_view to_string(TipKind k);

struct TipEvent {
  TipKind kind;
  double tau_star;
  long step;
};

struct Realization {
  std::vector<double> t;
  std::vector<State> x;  // raw states on the extended plane
};

// Path of realization `index`, stored every n.store_every steps plus the final
// state. Throws NumericalError on a non-finite state.
Realization euler_maruyama(const State& x0, const ModelParams& p, const NoiseSpec& n,
                           std::uint64_t index = 0,
                           ReflectionConvention conv = ReflectionConvention::kComponentwise);

// Streaming side-of-separatrix tracker for reflected states.
class TipDetector {
 public:
  TipDetector(const Separatrix& sep, const State& x0);
  // Returns true when this sample starts a new event.
  bool observe(const State& raw, double tau, long step);
  const std::vector<TipEvent>& events() const { return events_; }
  bool unresolved() const { return unresolved_; }
  bool on_origin_side() const { return origin_side_; }

 private:
  const Separatrix* sep_;
  bool origin_side_;
  bool unresolved_ = false;
  std::vector<TipEvent> events_;
};

struct TipDetection {
  std::vector<TipEvent> events;
  bool unresolved = false;  // some sample left the separatrix box
};

TipDetection detect_tips(const Realization& real, const Separatrix& sep);

struct EnsembleStats {
  long n_realizations = 0;
  long n_tipped = 0;
  double tip_fraction = 0.0;
  double tip_time_mean = std::nan("");
  double tip_time_median = std::nan("");
  double standard_error = 0.0;  // of tip_fraction
};

struct RealizationSummary {
  long index;
  std::optional<TipEvent> first_event;
  long n_events;
  bool unresolved;
  State final_raw;
  double final_tau;
};

struct EnsembleResult {
  EnsembleStats stats;
  TipKind counted_kind;  // O_to_S when x0 is on the O side
  std::vector<RealizationSummary> realizations;  // sorted by index
};

struct EnsembleOptions {
  bool stop_at_first_tip = true;
  ReflectionConvention convention = ReflectionConvention::kComponentwise;
};

// count independent realizations from x0; statistics use the first event of
// each realization. Parallel over realizations (TCTIP_THREADS), with results
// independent of the thread count.
EnsembleResult run_ensemble(const State& x0, const ModelParams& p, const NoiseSpec& n, long count,
                            const EnsembleOptions& opt = {});
EnsembleResult run_ensemble(const State& x0, const ModelParams& p, const NoiseSpec& n, long count,
                            const Separatrix& sep, const EnsembleOptions& opt = {});

EnsembleStats summarize(const std::vector<std::optional<double>>& first_tip_times);

enum class CombinedLabel { kTippedStoO, kTrackedStoS, kTippedOtoS, kStayedO };
std::string_view to_string(CombinedLabel l);

struct CombinedOptions {
  double near_tol = 0.05;  // "passes near S^-" radius, V_p^- units
  int store_every = 0;     // 0: no stored paths
  ReflectionConvention convention = ReflectionConvention::kComponentwise;
};

struct CombinedRealization {
  long index;
  CombinedLabel label;
  State final_state;  // reflected
  std::optional<double> tau_near_storm_minus;  // first approach to S^-
  std::optional<double> tau_first_crossing;    // first crossing of the past separatrix
  Realization path;  // empty unless store_every > 0
};

struct CombinedResult {
  std::vector<CombinedRealization> realizations;
  long counts[4] = {0, 0, 0, 0};  // indexed by CombinedLabel
  double tau0 = 0.0, tau_f = 0.0;
  State storm_minus = State::Zero(), storm_plus = State::Zero();
  // Among kTippedOtoS realizations, the fraction that came within near_tol of
  // S^- before the end of the run.
  double o_to_s_near_storm_minus_fraction = std::nan("");
};

// Euler-Maruyama on the ramped system for tau in [-tau_f / 2, tau_f / 2] with
// s advancing noiselessly. Labels compare the start side (separatrix of the
// past system) with the final side (separatrix of the future system). Requires
// Lambda(tau_f / 2) > 1 - 1e-6.
CombinedResult combined_rate_noise(const State& x0, const RampSpec& spec, double gamma,
                                   const NoiseSpec& n, long count,
                                   const CombinedOptions& opt = {});

}  // namespace tctip

#endif  // TCTIP_STOCHASTIC_HPP

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashcast/boosting/booster.hpp"
#include "crashcast/labeled_set.hpp"

namespace crashcast::hyperopt {

struct ParamRange {
  double lower = 0.0;
  double upper = 1.0;
  bool log_scale = false;
  bool integer = false;
};

using Params = std::map<std::string, double>;

struct SearchSpace {
  std::map<std::string, ParamRange> ranges;

  // max_depth [3,10], learning_rate [0.01,0.3], min_child_weight [1,7],
  // subsample [0.6,1], colsample_bytree [0.6,1], lambda and alpha log [1e-8,1].
  static SearchSpace reference();
  // lower <= upper, log ranges strictly positive. Throws kInvalidArgument.
  void validate() const;
};

// Uniform, log-uniform or inclusive-integer draw per parameter; fully
// determined by the seed.
Params sample_trial(const SearchSpace& space, std::uint64_t seed);

// accuracy - 0.1 * latency, latency in seconds per 1,000 predictions.
double scalarize(double accuracy, double latency);

struct Objectives {
  double accuracy = 0.0;    // maximized
  double latency = 0.0;     // minimized
  double complexity = 0.0;  // total tree nodes, minimized
};

// No worse in every objective and strictly better in at least one.
bool dominates(const Objectives& a, const Objectives& b);

struct Trial {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  Params params;
  Objectives objectives;
  double scalar = 0.0;
  bool failed = false;
  std::string error;
};

class ParetoFront {
 public:
  // Inserts the trial unless a member dominates it, dropping members it
  // dominates. Failed trials are ignored. Returns whether it was inserted.
  bool update(const Trial& trial);
  const std::vector<Trial>& members() const noexcept { return members_; }

 private:
  std::vector<Trial> members_;
};

// Evaluates one parameter point; throw to mark the trial failed.
using TrialEvaluator = std::function<Objectives(const Params&, std::uint64_t seed)>;

struct StudyResult {
  std::optional<Trial> best;  // highest scalar, earliest on ties
  ParetoFront front;
  std::vector<Trial> history;
  std::vector<std::optional<double>> best_so_far;  // empty until a trial succeeds
};

// Seeded random search: trial i samples with a seed derived from (seed, i).
// A trial that throws is recorded as failed and the study continues. Throws
// kInvalidArgument when budget is 0.
StudyResult run_study(const SearchSpace& space, std::size_t budget, const TrialEvaluator& evaluate, std::uint64_t seed);

// Array of {trial, seed, params, accuracy, latency, complexity, scalar,
// best_so_far, failed, error}.
nlohmann::json history_to_json(const StudyResult& study);

// Overrides max_depth, learning_rate, min_child_weight, subsample,
// colsample_bytree, lambda and alpha where present.
boosting::BoosterConfig apply_params(boosting::BoosterConfig base, const Params& params);

// Median over `repetitions` runs of the wall time to predict every probe row
// one at a time, scaled to seconds per 1,000 predictions.
double measure_latency(const std::function<void(std::span<const double>)>& predict, const Matrix& probe,
                       std::size_t repetitions = 3);

// Fits `base` with the trial's parameters on `train` and scores accuracy on
// `validation`, latency on a fixed 1,000-row probe cycled from `validation`,
// and complexity as the booster's node count.
TrialEvaluator booster_evaluator(LabeledSet train, LabeledSet validation, boosting::BoosterConfig base);

}  // namespace crashcast::hyperopt

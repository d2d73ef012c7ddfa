#include "crashcast/hyperopt/hyperopt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "crashcast/error.hpp"

namespace crashcast::hyperopt {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

SearchSpace SearchSpace::reference() {
  SearchSpace s;
  s.ranges["max_depth"] = {3, 10, false, true};
  s.ranges["learning_rate"] = {0.01, 0.3, false, false};
  s.ranges["min_child_weight"] = {1, 7, false, true};
  s.ranges["subsample"] = {0.6, 1.0, false, false};
  s.ranges["colsample_bytree"] = {0.6, 1.0, false, false};
  s.ranges["lambda"] = {1e-8, 1.0, true, false};
  s.ranges["alpha"] = {1e-8, 1.0, true, false};
  return s;
}

void SearchSpace::validate() const {
  for (const auto& [name, r] : ranges) {
    if (!(r.lower <= r.upper)) throw Error(ErrorCode::kInvalidArgument, "range " + name + ": lower > upper");
    if (r.log_scale && !(r.lower > 0.0)) throw Error(ErrorCode::kInvalidArgument, "range " + name + ": log needs lower > 0");
    if (r.integer && (std::floor(r.lower) != r.lower || std::floor(r.upper) != r.upper)) {
      throw Error(ErrorCode::kInvalidArgument, "range " + name + ": integer bounds required");
    }
  }
}

Params sample_trial(const SearchSpace& space, std::uint64_t seed) {
  space.validate();
  std::mt19937_64 rng(seed);
  Params p;
  for (const auto& [name, r] : space.ranges) {
    if (r.integer) {
      std::uniform_int_distribution<long long> d(static_cast<long long>(r.lower), static_cast<long long>(r.upper));
      p[name] = static_cast<double>(d(rng));
    } else if (r.log_scale) {
      std::uniform_real_distribution<double> d(std::log(r.lower), std::log(r.upper));
      p[name] = std::clamp(std::exp(d(rng)), r.lower, r.upper);
    } else {
      std::uniform_real_distribution<double> d(r.lower, r.upper);
      p[name] = r.lower == r.upper ? r.lower : d(rng);
    }
  }
  return p;
}

double scalarize(double accuracy, double latency) { return accuracy - 0.1 * latency; }

bool dominates(const Objectives& a, const Objectives& b) {
  const bool no_worse = a.accuracy >= b.accuracy && a.latency <= b.latency && a.complexity <= b.complexity;
  const bool better = a.accuracy > b.accuracy || a.latency < b.latency || a.complexity < b.complexity;
  return no_worse && better;
}

bool ParetoFront::update(const Trial& trial) {
  if (trial.failed) return false;
  for (const auto& m : members_) {
    if (dominates(m.objectives, trial.objectives)) return false;
  }
  std::erase_if(members_, [&](const Trial& m) { return dominates(trial.objectives, m.objectives); });
  members_.push_back(trial);
  return true;
}

StudyResult run_study(const SearchSpace& space, std::size_t budget, const TrialEvaluator& evaluate, std::uint64_t seed) {
  if (budget == 0) throw Error(ErrorCode::kInvalidArgument, "study budget must be at least 1");
  space.validate();
  StudyResult study;
  for (std::size_t i = 0; i < budget; ++i) {
    Trial t;
    t.index = i;
    t.seed = derive_seed(seed, i);
    t.params = sample_trial(space, t.seed);
    try {
      t.objectives = evaluate(t.params, t.seed);
      t.scalar = scalarize(t.objectives.accuracy, t.objectives.latency);
    } catch (const std::exception& e) {
      t.failed = true;
      t.error = e.what();
    }
    if (!t.failed && (!study.best || t.scalar > study.best->scalar)) study.best = t;
    study.front.update(t);
    study.best_so_far.push_back(study.best ? std::optional<double>(study.best->scalar) : std::nullopt);
    study.history.push_back(std::move(t));
  }
  return study;
}

nlohmann::json history_to_json(const StudyResult& study) {
  auto out = nlohmann::json::array();
  for (std::size_t i = 0; i < study.history.size(); ++i) {
    const auto& t = study.history[i];
    nlohmann::json entry{{"trial", t.index}, {"seed", t.seed}, {"params", t.params}, {"failed", t.failed}};
    if (t.failed) {
      entry["error"] = t.error;
    } else {
      entry["accuracy"] = t.objectives.accuracy;
      entry["latency"] = t.objectives.latency;
      entry["complexity"] = t.objectives.complexity;
      entry["scalar"] = t.scalar;
    }
    entry["best_so_far"] = study.best_so_far[i] ? nlohmann::json(*study.best_so_far[i]) : nlohmann::json();
    out.push_back(std::move(entry));
  }
  return out;
}

boosting::BoosterConfig apply_params(boosting::BoosterConfig base, const Params& params) {
  const auto set = [&](const char* name, auto& field) {
    if (const auto it = params.find(name); it != params.end()) {
      field = static_cast<std::remove_reference_t<decltype(field)>>(it->second);
    }
  };
  set("max_depth", base.max_depth);
  set("learning_rate", base.learning_rate);
  set("min_child_weight", base.min_child_weight);
  set("subsample", base.subsample);
  set("colsample_bytree", base.colsample_bytree);
  set("lambda", base.reg_lambda);
  set("alpha", base.reg_alpha);
  return base;
}

double measure_latency(const std::function<void(std::span<const double>)>& predict, const Matrix& probe,
                       std::size_t repetitions) {
  if (probe.rows() == 0) throw Error(ErrorCode::kEmptyMatrix, "latency probe is empty");
  std::vector<double> runs;
  for (std::size_t r = 0; r < std::max<std::size_t>(1, repetitions); ++r) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < probe.rows(); ++i) predict(probe.row(i));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    runs.push_back(secs * 1000.0 / static_cast<double>(probe.rows()));
  }
  std::nth_element(runs.begin(), runs.begin() + static_cast<std::ptrdiff_t>(runs.size() / 2), runs.end());
  return runs[runs.size() / 2];
}

TrialEvaluator booster_evaluator(LabeledSet train, LabeledSet validation, boosting::BoosterConfig base) {
  if (validation.size() == 0) throw Error(ErrorCode::kEmptyInput, "validation set is empty");
  std::vector<std::size_t> probe_rows(1000);
  for (std::size_t i = 0; i < probe_rows.size(); ++i) probe_rows[i] = i % validation.size();
  Matrix probe = validation.x.select_rows(probe_rows);
  return [train = std::move(train), validation = std::move(validation), probe = std::move(probe), base](
             const Params& params, std::uint64_t seed) {
    auto config = apply_params(base, params);
    config.seed = seed;
    try {
      const auto booster = boosting::Booster::fit(train.x, train.y, config);
      std::size_t correct = 0;
      std::vector<double> margin(booster.num_classes());
      for (std::size_t i = 0; i < validation.size(); ++i) {
        booster.predict_margin(validation.x.row(i), margin);
        correct += std::max_element(margin.begin(), margin.end()) - margin.begin() == validation.y[i];
      }
      Objectives o;
      o.accuracy = static_cast<double>(correct) / static_cast<double>(validation.size());
      o.latency = measure_latency([&](std::span<const double> x) { booster.predict_margin(x, margin); }, probe);
      o.complexity = static_cast<double>(booster.node_count());
      return o;
    } catch (const Error& e) {
      throw Error(ErrorCode::kEvaluationFailure, e.what());
    }
  };
}

}  // namespace crashcast::hyperopt

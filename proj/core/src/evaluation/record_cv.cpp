#include <vector>

#include "crashcast/error.hpp"
#include "crashcast/evaluation/evaluation.hpp"

namespace crashcast::evaluation {

CvReport cross_validate_records(std::span<const CrashRecord> records, const FoldSpec& spec,
                                const TrainOptions& options, std::uint64_t seed) {
  std::vector<CrashRecord> labelled;
  for (const auto& r : records) {
    if (r.severity) labelled.push_back(r);
  }
  std::vector<int> labels;
  std::vector<std::optional<GeoPoint>> locations;
  for (const auto& r : labelled) {
    labels.push_back(static_cast<int>(*r.severity));
    locations.push_back(r.location);
  }
  const FoldModel model = [&](const std::vector<std::size_t>& train, const std::vector<std::size_t>& test) {
    std::vector<CrashRecord> train_records;
    train_records.reserve(train.size());
    for (std::size_t i : train) train_records.push_back(labelled[i]);
    const ModelBundle bundle = train_bundle(train_records, options);
    Matrix proba(0, kSeverityCount);
    for (std::size_t i : test) proba.append_row(bundle.predict(labelled[i]).probabilities);
    return proba;
  };
  return kfold_cv(labels, locations, spec, model, seed);
}

}  // namespace crashcast::evaluation

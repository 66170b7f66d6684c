#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace mbtl::ltc {

inline constexpr std::size_t kDefaultNeighbors = 5;

/// Task index, or nullopt for a novel task.
using Verdict = std::optional<std::size_t>;

double manhattan(std::span<const double> p, std::span<const double> q);

/// Lazy K-nearest-neighbour classifier over stored latent samples.
struct LtcModel {
  std::vector<std::vector<double>> points;
  std::vector<std::size_t> labels;       // index into label_names
  std::vector<std::string> label_names;
  std::size_t k = kDefaultNeighbors;
  double xi = 0.0;                       // novelty threshold, Manhattan units

  std::size_t dim() const { return points.empty() ? 0 : points.front().size(); }
  void validate() const;
};

/// samples[i] holds the latent samples of task i.
LtcModel fit(const std::vector<std::vector<std::vector<double>>>& samples, std::vector<std::string> label_names,
             std::size_t k, double xi);

/// Novel when the nearest stored point is farther than ξ; otherwise the
/// majority label of the K nearest (neighbours ordered by distance, then
/// label). Vote ties go to the smaller summed distance, then the lower label.
Verdict classify(const LtcModel& model, std::span<const double> s);

struct BatchVerdict {
  std::vector<Verdict> per_sample;
  /// Plurality over per-sample verdicts; ties prefer Novel, then the lower
  /// label.
  Verdict majority;
};

BatchVerdict batch_classify(const LtcModel& model, const std::vector<std::vector<double>>& samples);

std::string verdict_name(const LtcModel& model, const Verdict& v);

/// {"k", "xi", "label_names", "points", "labels"}
nlohmann::json model_to_json(const LtcModel& model);
LtcModel model_from_json(const nlohmann::json& doc);

}  // namespace mbtl::ltc

#include "mbtl/latent_task.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "mbtl/errors.hpp"

namespace mbtl::ltc {

double manhattan(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("manhattan: dimension mismatch (" + std::to_string(p.size()) + " vs " +
                                std::to_string(q.size()) + ")");
  }
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) d += std::abs(p[i] - q[i]);
  return d;
}

void LtcModel::validate() const {
  if (points.empty()) throw std::invalid_argument("LtcModel: no training points");
  if (points.size() != labels.size()) throw std::invalid_argument("LtcModel: points and labels differ in count");
  if (k == 0 || k > points.size()) {
    throw std::invalid_argument("LtcModel: K=" + std::to_string(k) + " must lie in [1, " +
                                std::to_string(points.size()) + "]");
  }
  if (!(xi > 0.0) || !std::isfinite(xi)) throw std::invalid_argument("LtcModel: xi must be positive and finite");
  const std::size_t d = points.front().size();
  for (const auto& p : points)
    if (p.size() != d) throw std::invalid_argument("LtcModel: points differ in dimension");
  for (std::size_t l : labels)
    if (l >= label_names.size()) throw std::invalid_argument("LtcModel: label without a name");
}

LtcModel fit(const std::vector<std::vector<std::vector<double>>>& samples, std::vector<std::string> label_names,
             std::size_t k, double xi) {
  if (samples.empty()) throw std::invalid_argument("fit: at least one task is required");
  if (label_names.size() != samples.size()) throw std::invalid_argument("fit: one label name per task");
  LtcModel m;
  m.label_names = std::move(label_names);
  m.k = k;
  m.xi = xi;
  for (std::size_t task = 0; task < samples.size(); ++task) {
    for (const auto& p : samples[task]) {
      m.points.push_back(p);
      m.labels.push_back(task);
    }
  }
  m.validate();
  return m;
}

Verdict classify(const LtcModel& model, std::span<const double> s) {
  struct Neighbour {
    double dist;
    std::size_t label;
  };
  std::vector<Neighbour> all;
  all.reserve(model.points.size());
  for (std::size_t i = 0; i < model.points.size(); ++i) all.push_back({manhattan(model.points[i], s), model.labels[i]});
  const auto by_rank = [](const Neighbour& a, const Neighbour& b) {
    return a.dist < b.dist || (a.dist == b.dist && a.label < b.label);
  };
  const std::size_t k = std::min(model.k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), by_rank);
  if (all.front().dist > model.xi) return std::nullopt;

  std::map<std::size_t, std::pair<std::size_t, double>> votes;  // label -> (count, summed distance)
  for (std::size_t i = 0; i < k; ++i) {
    auto& v = votes[all[i].label];
    ++v.first;
    v.second += all[i].dist;
  }
  std::size_t best = votes.begin()->first;
  for (const auto& [label, v] : votes) {
    const auto& b = votes[best];
    if (v.first > b.first || (v.first == b.first && v.second < b.second)) best = label;
  }
  return best;
}

BatchVerdict batch_classify(const LtcModel& model, const std::vector<std::vector<double>>& samples) {
  if (samples.empty()) throw std::invalid_argument("batch_classify: empty sample batch");
  BatchVerdict out;
  std::size_t novel = 0;
  std::map<std::size_t, std::size_t> counts;
  for (const auto& s : samples) {
    const Verdict v = classify(model, s);
    out.per_sample.push_back(v);
    if (v) {
      ++counts[*v];
    } else {
      ++novel;
    }
  }
  out.majority = std::nullopt;
  std::size_t best = novel;
  for (const auto& [label, c] : counts) {
    if (c > best) {
      best = c;
      out.majority = label;
    }
  }
  return out;
}

std::string verdict_name(const LtcModel& model, const Verdict& v) {
  if (!v) return "novel";
  return *v < model.label_names.size() ? model.label_names[*v] : std::to_string(*v);
}

nlohmann::json model_to_json(const LtcModel& model) {
  return {{"k", model.k},
          {"xi", model.xi},
          {"label_names", model.label_names},
          {"points", model.points},
          {"labels", model.labels}};
}

LtcModel model_from_json(const nlohmann::json& doc) {
  LtcModel m;
  try {
    m.k = doc.at("k").get<std::size_t>();
    m.xi = doc.at("xi").get<double>();
    m.label_names = doc.at("label_names").get<std::vector<std::string>>();
    m.points = doc.at("points").get<std::vector<std::vector<double>>>();
    m.labels = doc.at("labels").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed LTC model: ") + e.what());
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return m;
}

}  // namespace mbtl::ltc

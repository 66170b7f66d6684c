#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace mbtl {

inline constexpr int kMetricsFormatVersion = 1;

/// One evaluation of one task at one point of a run.
struct MetricsRecord {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string task;
  long env_step = 0;
  double episode_return = 0.0;          // mean over the evaluation episodes
  std::vector<double> episode_returns;  // per episode
  double wall_time = 0.0;               // seconds; 0 unless enabled

  bool operator==(const MetricsRecord&) const = default;
};

nlohmann::json record_to_json(const MetricsRecord& r);
MetricsRecord record_from_json(const nlohmann::json& doc);

/// Append-only JSON-lines writer. Rejects records that go back in env_step.
class MetricsWriter {
 public:
  /// truncate starts a new file; otherwise records are appended.
  MetricsWriter(const std::filesystem::path& path, bool truncate);
  void append(const MetricsRecord& record);
  long last_step() const { return last_step_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  long last_step_ = -1;
};

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

/// Evaluation returns of one (run, seed, task) on its step grid.
struct Curve {
  std::string label;
  std::uint64_t seed = 0;
  std::vector<long> steps;
  std::vector<double> returns;
};

/// One curve per seed for task, sorted by seed. An empty task matches every
/// task; several tasks at one step are averaged.
std::vector<Curve> curves_for_task(const std::vector<MetricsRecord>& records, const std::string& task = "");

enum class Verdict { positive, neutral, negative };
std::string to_string(Verdict v);

struct TlOptions {
  double final_window = 0.1;  // fraction of the eval grid
  double sd_multiplier = 1.0;
  double margin = 0.0;
};

struct TlMetrics {
  double transfer_first = 0.0, baseline_first = 0.0;
  double transfer_overall = 0.0, baseline_overall = 0.0;
  double transfer_final = 0.0, baseline_final = 0.0;
  double jumpstart = 0.0;
  double overall = 0.0;
  double final_perf = 0.0;
  double pooled_sd = 0.0;  // of the per-seed overall means
  Verdict verdict = Verdict::neutral;
};

/// Sample standard deviation pooled over two groups; 0 when undefined.
double pooled_sd(const std::vector<double>& a, const std::vector<double>& b);
double mean(const std::vector<double>& xs);

double curve_overall(const Curve& c);
double curve_final(const Curve& c, double final_window);

/// Transfer versus baseline over seeds. All curves must share one step grid.
/// The verdict compares the overall difference with
/// sd_multiplier·pooled_sd + margin.
TlMetrics tl_metrics(const std::vector<Curve>& transfer, const std::vector<Curve>& baseline, const TlOptions& opt = {});

struct SummaryRow {
  std::string name;
  TlMetrics metrics;
};

/// Markdown: an "Average episode return" table and a "Final averaged episode
/// return" table, one row per comparison.
std::string summary_tables(const std::vector<SummaryRow>& rows);

enum class BandKind { min_max, std_dev };

struct PlotSeries {
  std::string label;
  std::vector<Curve> seeds;
};

struct PlotOptions {
  std::string title;
  BandKind band = BandKind::min_max;
  int width = 640;
  int height = 400;
};

/// Mean curve with a shaded band per series, as SVG text.
std::string plot_svg(const std::vector<PlotSeries>& series, const PlotOptions& opt = {});

}  // namespace mbtl

#include "mbtl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "mbtl/errors.hpp"

namespace mbtl {

using nlohmann::json;

json record_to_json(const MetricsRecord& r) {
  return {{"format_version", kMetricsFormatVersion},
          {"run_id", r.run_id},
          {"seed", r.seed},
          {"task", r.task},
          {"env_step", r.env_step},
          {"episode_return", r.episode_return},
          {"episode_returns", r.episode_returns},
          {"wall_time", r.wall_time}};
}

MetricsRecord record_from_json(const json& doc) {
  try {
    if (doc.at("format_version").get<int>() != kMetricsFormatVersion)
      throw ConfigError("metrics: unsupported format_version");
    MetricsRecord r;
    r.run_id = doc.at("run_id").get<std::string>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.task = doc.at("task").get<std::string>();
    r.env_step = doc.at("env_step").get<long>();
    r.episode_return = doc.at("episode_return").get<double>();
    r.episode_returns = doc.value("episode_returns", std::vector<double>{});
    r.wall_time = doc.value("wall_time", 0.0);
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("metrics: malformed record: ") + e.what());
  }
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, bool truncate) : path_(path) {
  if (!truncate && std::filesystem::exists(path)) {
    for (const auto& r : read_metrics(path)) last_step_ = std::max(last_step_, r.env_step);
  }
  out_.open(path, truncate ? std::ios::trunc : std::ios::app);
  if (!out_) throw IoError("cannot open metrics file " + path.string());
}

void MetricsWriter::append(const MetricsRecord& record) {
  if (record.env_step < last_step_) throw std::logic_error("metrics: env_step went backwards");
  out_ << record_to_json(record).dump() << '\n';
  out_.flush();
  if (!out_) throw IoError("failed writing " + path_.string());
  last_step_ = record.env_step;
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics file " + path.string());
  std::vector<MetricsRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(record_from_json(doc));
  }
  return out;
}

std::vector<Curve> curves_for_task(const std::vector<MetricsRecord>& records, const std::string& task) {
  // (run, seed) -> step -> (sum, count)
  std::map<std::pair<std::string, std::uint64_t>, std::map<long, std::pair<double, int>>> acc;
  for (const auto& r : records) {
    if (!task.empty() && r.task != task) continue;
    auto& cell = acc[{r.run_id, r.seed}][r.env_step];
    cell.first += r.episode_return;
    cell.second += 1;
  }
  std::vector<Curve> out;
  for (const auto& [key, steps] : acc) {
    Curve c;
    c.label = key.first;
    c.seed = key.second;
    for (const auto& [step, cell] : steps) {
      c.steps.push_back(step);
      c.returns.push_back(cell.first / cell.second);
    }
    out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const Curve& a, const Curve& b) { return a.seed < b.seed; });
  return out;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::positive: return "positive";
    case Verdict::neutral: return "neutral";
    case Verdict::negative: return "negative";
  }
  return "?";
}

double mean(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double pooled_sd(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t dof = a.size() + b.size();
  if (dof <= 2) return 0.0;
  auto ss = [](const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s;
  };
  return std::sqrt((ss(a) + ss(b)) / static_cast<double>(dof - 2));
}

double curve_overall(const Curve& c) { return mean(c.returns); }

double curve_final(const Curve& c, double final_window) {
  if (c.returns.empty()) throw std::invalid_argument("empty curve");
  if (!(final_window > 0.0 && final_window <= 1.0)) throw std::invalid_argument("final_window must lie in (0, 1]");
  const auto n = c.returns.size();
  auto k = static_cast<std::size_t>(std::ceil(final_window * static_cast<double>(n) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, n);
  return mean(std::vector<double>(c.returns.end() - static_cast<long>(k), c.returns.end()));
}

TlMetrics tl_metrics(const std::vector<Curve>& transfer, const std::vector<Curve>& baseline, const TlOptions& opt) {
  if (transfer.empty() || baseline.empty()) throw std::invalid_argument("tl_metrics: both logs need a curve");
  const auto& grid = transfer.front().steps;
  if (grid.empty()) throw std::invalid_argument("tl_metrics: empty eval grid");
  for (const auto* group : {&transfer, &baseline})
    for (const auto& c : *group)
      if (c.steps != grid || c.returns.size() != grid.size())
        throw std::invalid_argument("tl_metrics: logs do not share an eval grid");

  std::vector<double> first_t, first_b, over_t, over_b, fin_t, fin_b;
  for (const auto& c : transfer) {
    first_t.push_back(c.returns.front());
    over_t.push_back(curve_overall(c));
    fin_t.push_back(curve_final(c, opt.final_window));
  }
  for (const auto& c : baseline) {
    first_b.push_back(c.returns.front());
    over_b.push_back(curve_overall(c));
    fin_b.push_back(curve_final(c, opt.final_window));
  }
  TlMetrics m;
  m.transfer_first = mean(first_t);
  m.baseline_first = mean(first_b);
  m.transfer_overall = mean(over_t);
  m.baseline_overall = mean(over_b);
  m.transfer_final = mean(fin_t);
  m.baseline_final = mean(fin_b);
  m.jumpstart = m.transfer_first - m.baseline_first;
  m.overall = m.transfer_overall - m.baseline_overall;
  m.final_perf = m.transfer_final - m.baseline_final;
  m.pooled_sd = pooled_sd(over_t, over_b);
  const double threshold = opt.sd_multiplier * m.pooled_sd + opt.margin;
  if (m.overall > threshold) {
    m.verdict = Verdict::positive;
  } else if (m.overall < -threshold) {
    m.verdict = Verdict::negative;
  }
  return m;
}

namespace {

std::string fmt(double x, const char* spec = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string summary_tables(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "### Average episode return\n\n"
      << "| Comparison | Baseline | Transfer | Difference | Jumpstart | Verdict |\n"
      << "|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << "| " << r.name << " | " << fmt(m.baseline_overall) << " | " << fmt(m.transfer_overall) << " | "
        << fmt(m.overall) << " | " << fmt(m.jumpstart) << " | " << to_string(m.verdict) << " |\n";
  }
  out << "\n### Final averaged episode return\n\n"
      << "| Comparison | Baseline | Transfer | Difference |\n"
      << "|---|---|---|---|\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << "| " << r.name << " | " << fmt(m.baseline_final) << " | " << fmt(m.transfer_final) << " | "
        << fmt(m.final_perf) << " |\n";
  }
  return out.str();
}

std::string plot_svg(const std::vector<PlotSeries>& series, const PlotOptions& opt) {
  if (series.empty()) throw std::invalid_argument("plot: nothing to plot");
  struct Band {
    std::vector<long> steps;
    std::vector<double> mid, lo, hi;
  };
  std::vector<Band> bands;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    if (s.seeds.empty() || s.seeds.front().steps.empty())
      throw std::invalid_argument("plot: series '" + s.label + "' is empty");
    Band b;
    b.steps = s.seeds.front().steps;
    for (const auto& c : s.seeds)
      if (c.steps != b.steps || c.returns.size() != b.steps.size())
        throw std::invalid_argument("plot: seeds of '" + s.label + "' do not share an eval grid");
    for (std::size_t i = 0; i < b.steps.size(); ++i) {
      std::vector<double> ys;
      for (const auto& c : s.seeds) ys.push_back(c.returns[i]);
      const double m = mean(ys);
      double lo = *std::min_element(ys.begin(), ys.end());
      double hi = *std::max_element(ys.begin(), ys.end());
      if (opt.band == BandKind::std_dev) {
        double ss = 0.0;
        for (double y : ys) ss += (y - m) * (y - m);
        const double sd = ys.size() > 1 ? std::sqrt(ss / static_cast<double>(ys.size() - 1)) : 0.0;
        lo = m - sd;
        hi = m + sd;
      }
      b.mid.push_back(m);
      b.lo.push_back(lo);
      b.hi.push_back(hi);
      x0 = std::min(x0, static_cast<double>(b.steps[i]));
      x1 = std::max(x1, static_cast<double>(b.steps[i]));
      y0 = std::min(y0, lo);
      y1 = std::max(y1, hi);
    }
    bands.push_back(std::move(b));
  }
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) {
    y0 -= 1.0;
    y1 += 1.0;
  }
  const double left = 60, right = 20, top = 30, bottom = 40;
  const double pw = opt.width - left - right, ph = opt.height - top - bottom;
  auto px = [&](double x) { return fmt(left + (x - x0) / (x1 - x0) * pw); };
  auto py = [&](double y) { return fmt(top + (1.0 - (y - y0) / (y1 - y0)) * ph); };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
      << "\" viewBox=\"0 0 " << opt.width << ' ' << opt.height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!opt.title.empty())
    out << "<text x=\"" << opt.width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
        << escape_xml(opt.title) << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << left << "\" y=\"" << opt.height - 10 << "\" font-size=\"11\">" << fmt(x0, "%.0f")
      << "</text>\n";
  out << "<text x=\"" << opt.width - right << "\" y=\"" << opt.height - 10 << "\" font-size=\"11\" text-anchor=\"end\">"
      << fmt(x1, "%.0f") << "</text>\n";
  out << "<text x=\"" << opt.width / 2 << "\" y=\"" << opt.height - 10
      << "\" font-size=\"11\" text-anchor=\"middle\">environment steps</text>\n";
  out << "<text x=\"" << left - 4 << "\" y=\"" << top + 10 << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(y1)
      << "</text>\n";
  out << "<text x=\"" << left - 4 << "\" y=\"" << top + ph << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(y0)
      << "</text>\n";
  for (std::size_t s = 0; s < bands.size(); ++s) {
    const auto& b = bands[s];
    const char* color = palette[s % std::size(palette)];
    out << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < b.steps.size(); ++i) out << px(static_cast<double>(b.steps[i])) << ',' << py(b.hi[i]) << ' ';
    for (std::size_t i = b.steps.size(); i-- > 0;) out << px(static_cast<double>(b.steps[i])) << ',' << py(b.lo[i]) << ' ';
    out << "\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < b.steps.size(); ++i) out << px(static_cast<double>(b.steps[i])) << ',' << py(b.mid[i]) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << left + 8 << "\" y=\"" << top + 16 + 14 * static_cast<double>(s) << "\" font-size=\"11\" fill=\""
        << color << "\">" << escape_xml(series[s].label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace mbtl

#include "trajlm/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "trajlm/errors.hpp"

namespace trajlm {

namespace {

using Json = nlohmann::ordered_json;

void validate_pair(const std::vector<Vec2>& pred, const std::vector<Vec2>& truth,
                   std::size_t horizon_steps) {
  if (pred.size() != truth.size())
    throw DataError("trajectory lengths " + std::to_string(pred.size()) + " vs " +
                    std::to_string(truth.size()));
  if (horizon_steps < 1 || horizon_steps > truth.size())
    throw DataError("horizon " + std::to_string(horizon_steps) + " outside [1, " +
                    std::to_string(truth.size()) + "]");
}

std::pair<double, double> mean_and_std(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());  // population convention
  return {mean, std::sqrt(var)};
}

Json block_json(const std::vector<std::string>& labels,
                const std::vector<std::pair<double, double>>& stats) {
  Json block = Json::object();
  for (std::size_t i = 0; i < labels.size(); ++i)
    block[labels[i]] = Json::array({stats[i].first, stats[i].second});
  return block;
}

void parse_block(const Json& block, const std::string& name, std::vector<std::string>& labels,
                 std::vector<std::pair<double, double>>& stats) {
  if (!block.is_object()) throw DataError("report field '" + name + "' must be an object");
  for (const auto& [label, value] : block.items()) {
    if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number())
      throw DataError("report field '" + name + "." + label + "' must be [mean, std]");
    labels.push_back(label);
    stats.emplace_back(value[0].get<double>(), value[1].get<double>());
  }
}

}  // namespace

double ade(const std::vector<Vec2>& pred, const std::vector<Vec2>& truth,
           std::size_t horizon_steps) {
  validate_pair(pred, truth, horizon_steps);
  double sum = 0.0;
  for (std::size_t i = 0; i < horizon_steps; ++i) sum += norm(pred[i] - truth[i]);
  return sum / static_cast<double>(horizon_steps);
}

double fde(const std::vector<Vec2>& pred, const std::vector<Vec2>& truth,
           std::size_t horizon_steps) {
  validate_pair(pred, truth, horizon_steps);
  return norm(pred[horizon_steps - 1] - truth[horizon_steps - 1]);
}

double miss_rate(const std::vector<TrajectoryPair>& pairs, double threshold, MissMode mode) {
  if (pairs.empty()) throw DataError("miss rate needs at least one scene");
  if (mode == MissMode::kFinalDisplacement) {
    std::size_t misses = 0;
    for (const auto& [pred, truth] : pairs)
      if (fde(pred, truth, truth.size()) > threshold) ++misses;
    return static_cast<double>(misses) / static_cast<double>(pairs.size());
  }
  std::size_t misses = 0;
  std::size_t total = 0;
  for (const auto& [pred, truth] : pairs) {
    validate_pair(pred, truth, truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (norm(pred[i] - truth[i]) > threshold) ++misses;
      ++total;
    }
  }
  return static_cast<double>(misses) / static_cast<double>(total);
}

double inference_efficiency(const std::vector<double>& samples_seconds, std::size_t warmup) {
  if (samples_seconds.empty()) throw DataError("inference efficiency needs at least one sample");
  if (samples_seconds.size() <= warmup)
    throw DataError("all " + std::to_string(samples_seconds.size()) +
                    " timing samples fall inside the warm-up window");
  double sum = 0.0;
  for (std::size_t i = warmup; i < samples_seconds.size(); ++i) sum += samples_seconds[i];
  return sum / static_cast<double>(samples_seconds.size() - warmup);
}

std::string horizon_label(std::size_t steps) {
  if (steps % 2 == 0) return std::to_string(steps / 2) + "s";
  std::ostringstream out;
  out << std::fixed << std::setprecision(1) << (static_cast<double>(steps) * kStepSeconds) << "s";
  return out.str();
}

SceneResult evaluate_scene(const std::string& id, const std::vector<Vec2>& pred,
                           const std::vector<Vec2>& truth, const HorizonSpec& spec) {
  SceneResult r;
  r.id = id;
  for (std::size_t steps : spec.ade_steps) r.ade_m.push_back(ade(pred, truth, steps));
  for (std::size_t steps : spec.fde_steps) r.fde_m.push_back(fde(pred, truth, steps));
  return r;
}

MetricsReport aggregate(const std::vector<SceneResult>& results, const HorizonSpec& spec,
                        double miss, double ie_seconds) {
  if (results.empty()) throw DataError("aggregate needs at least one scene result");
  for (const SceneResult& r : results) {
    if (r.ade_m.size() != spec.ade_steps.size() || r.fde_m.size() != spec.fde_steps.size())
      throw DataError("scene '" + r.id + "' carries mismatched horizons");
  }

  MetricsReport report;
  report.mr = miss;
  report.ie_s = ie_seconds;
  report.n_scenes = results.size();
  for (std::size_t h = 0; h < spec.ade_steps.size(); ++h) {
    std::vector<double> xs;
    for (const SceneResult& r : results) xs.push_back(r.ade_m[h]);
    report.ade_labels.push_back(horizon_label(spec.ade_steps[h]));
    report.ade.push_back(mean_and_std(xs));
  }
  for (std::size_t h = 0; h < spec.fde_steps.size(); ++h) {
    std::vector<double> xs;
    for (const SceneResult& r : results) xs.push_back(r.fde_m[h]);
    report.fde_labels.push_back(horizon_label(spec.fde_steps[h]));
    report.fde.push_back(mean_and_std(xs));
  }
  return report;
}

std::string report_to_json(const MetricsReport& report) {
  Json j;
  j["ade"] = block_json(report.ade_labels, report.ade);
  j["fde"] = block_json(report.fde_labels, report.fde);
  j["mr"] = report.mr;
  j["ie_s"] = report.ie_s;
  j["n_scenes"] = report.n_scenes;
  return j.dump(2);
}

MetricsReport report_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw DataError(std::string("report is not valid JSON: ") + e.what());
  }
  for (const std::string key : {"ade", "fde", "mr", "ie_s", "n_scenes"})
    if (!j.contains(key)) throw DataError("report is missing field '" + key + "'");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (key != "ade" && key != "fde" && key != "mr" && key != "ie_s" && key != "n_scenes")
      throw DataError("report has unknown field '" + key + "'");
  }
  if (!j["mr"].is_number() || !j["ie_s"].is_number() || !j["n_scenes"].is_number_unsigned())
    throw DataError("report scalar fields have the wrong types");

  MetricsReport report;
  parse_block(j["ade"], "ade", report.ade_labels, report.ade);
  parse_block(j["fde"], "fde", report.fde_labels, report.fde);
  report.mr = j["mr"].get<double>();
  report.ie_s = j["ie_s"].get<double>();
  report.n_scenes = j["n_scenes"].get<std::size_t>();
  return report;
}

void save_report(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << report_to_json(report) << "\n";
}

MetricsReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return report_from_json(buf.str());
}

void save_per_scene_csv(const std::vector<SceneResult>& results, const HorizonSpec& spec,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << "scene_id";
  for (std::size_t steps : spec.ade_steps) out << ",ade_" << horizon_label(steps);
  for (std::size_t steps : spec.fde_steps) out << ",fde_" << horizon_label(steps);
  out << "\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const SceneResult& r : results) {
    out << r.id;
    for (double x : r.ade_m) out << "," << x;
    for (double x : r.fde_m) out << "," << x;
    out << "\n";
  }
}

}  // namespace trajlm

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "magicnet/detectors.hpp"

namespace magicnet::detectors {

std::string_view to_string(Tag tag) { return tag == Tag::TruePositive ? "TP" : "FP"; }

std::vector<std::size_t> DetectionSchedule::timestamps() const {
  std::vector<std::size_t> ts;
  ts.reserve(detections.size());
  for (const auto& d : detections) ts.push_back(d.t);
  return ts;
}

std::size_t round_half_up(double x) {
  if (!(x >= 0.0)) throw std::invalid_argument("round_half_up: negative or NaN input");
  return static_cast<std::size_t>(std::floor(x + 0.5 + 1e-9));
}

ScheduleCounts schedule_counts(std::size_t drifts, double precision, double recall) {
  if (!(precision > 0.0 && precision <= 1.0)) {
    throw std::invalid_argument("precision must be in (0, 1], got " + std::to_string(precision));
  }
  if (!(recall > 0.0 && recall <= 1.0)) {
    throw std::invalid_argument("recall must be in (0, 1], got " + std::to_string(recall));
  }
  ScheduleCounts c;
  c.true_positives = round_half_up(recall * static_cast<double>(drifts));
  c.total = round_half_up(static_cast<double>(c.true_positives) / precision);
  return c;
}

namespace {

bool in_any_window(std::size_t t, const std::vector<std::size_t>& drifts) {
  return std::any_of(drifts.begin(), drifts.end(),
                     [t](std::size_t d) { return t > d && t <= d + kTpWindow; });
}

}  // namespace

DetectionSchedule build_schedule(const std::vector<std::size_t>& true_drifts, double precision,
                                 double recall, std::size_t stream_length, std::uint64_t seed,
                                 std::size_t min_gap) {
  const auto counts = schedule_counts(true_drifts.size(), precision, recall);
  if (!std::is_sorted(true_drifts.begin(), true_drifts.end()) ||
      std::adjacent_find(true_drifts.begin(), true_drifts.end()) != true_drifts.end()) {
    throw std::invalid_argument("true drifts must be strictly increasing");
  }
  for (auto d : true_drifts) {
    if (d + 1 >= stream_length) {
      throw std::invalid_argument("drift at " + std::to_string(d) + " leaves no room in a stream of " +
                                  std::to_string(stream_length) + " points");
    }
  }

  std::mt19937_64 rng(seed);
  DetectionSchedule schedule;
  schedule.target_precision = precision;
  schedule.target_recall = recall;

  std::vector<std::size_t> order(true_drifts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(counts.true_positives);
  std::sort(order.begin(), order.end());
  for (auto idx : order) {
    const std::size_t d = true_drifts[idx];
    std::uniform_int_distribution<std::size_t> pos(d + 1, std::min(d + kTpWindow, stream_length - 1));
    schedule.detections.push_back({pos(rng), Tag::TruePositive});
  }

  const std::size_t fp = counts.false_positives();
  if (fp > 0) {
    if (stream_length < 2) throw std::runtime_error("cannot place false positives in an empty stream");
    std::uniform_int_distribution<std::size_t> pos(1, stream_length - 1);
    const std::size_t max_attempts = 100000 * fp;
    std::size_t placed = 0;
    for (std::size_t attempt = 0; attempt < max_attempts && placed < fp; ++attempt) {
      const std::size_t t = pos(rng);
      if (in_any_window(t, true_drifts)) continue;
      const bool crowded = std::any_of(
          schedule.detections.begin(), schedule.detections.end(), [&](const Detection& other) {
            const std::size_t gap = t > other.t ? t - other.t : other.t - t;
            return gap < std::max<std::size_t>(min_gap, 1);
          });
      if (crowded) continue;
      schedule.detections.push_back({t, Tag::FalsePositive});
      ++placed;
    }
    if (placed < fp) {
      throw std::runtime_error("cannot place " + std::to_string(fp) + " false positives in a stream of " +
                               std::to_string(stream_length) + " points with spacing " +
                               std::to_string(min_gap));
    }
  }
  std::sort(schedule.detections.begin(), schedule.detections.end(),
            [](const Detection& a, const Detection& b) { return a.t < b.t; });
  return schedule;
}

DetectionSchedule empty_schedule() { return {}; }

Measured measure_schedule(const DetectionSchedule& schedule,
                          const std::vector<std::size_t>& true_drifts) {
  std::vector<bool> claimed(true_drifts.size(), false);
  Measured m;
  for (const auto& det : schedule.detections) {
    for (std::size_t i = 0; i < true_drifts.size(); ++i) {
      if (!claimed[i] && det.t > true_drifts[i] && det.t <= true_drifts[i] + kTpWindow) {
        claimed[i] = true;
        ++m.true_positives;
        break;
      }
    }
  }
  if (!schedule.detections.empty()) {
    m.precision = static_cast<double>(m.true_positives) / static_cast<double>(schedule.size());
  }
  if (!true_drifts.empty()) {
    m.recall = static_cast<double>(m.true_positives) / static_cast<double>(true_drifts.size());
  }
  return m;
}

}  // namespace magicnet::detectors

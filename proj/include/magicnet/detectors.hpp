#pragma once

// Simulated drift detectors: detection schedules with a target precision
// and recall against the true drift positions.

#include <cstdint>
#include <string_view>
#include <vector>

namespace magicnet::detectors {

/// A detection counts as a true positive when it falls in (drift, drift + kTpWindow].
inline constexpr std::size_t kTpWindow = 1000;

enum class Tag : std::uint8_t { TruePositive, FalsePositive };
std::string_view to_string(Tag tag);

struct Detection {
  std::size_t t = 0;
  Tag tag = Tag::TruePositive;
  bool operator==(const Detection&) const = default;
};

struct DetectionSchedule {
  std::vector<Detection> detections;  // sorted by t
  double target_precision = 1.0;
  double target_recall = 1.0;

  std::vector<std::size_t> timestamps() const;
  std::size_t size() const { return detections.size(); }
  bool operator==(const DetectionSchedule&) const = default;
};

/// Round-half-up, tolerant of representation error just below .5.
std::size_t round_half_up(double x);

struct ScheduleCounts {
  std::size_t true_positives = 0;
  std::size_t total = 0;
  std::size_t false_positives() const { return total - true_positives; }
};

/// TP = round(recall * drifts), total = round(TP / precision).
ScheduleCounts schedule_counts(std::size_t drifts, double precision, double recall);

/// TPs go to distinct drifts chosen uniformly, each uniform inside its
/// window. FPs are uniform over points outside every drift window and at
/// least `min_gap` points from any other detection. Throws
/// std::invalid_argument for targets outside (0, 1] and std::runtime_error
/// when the false positives cannot be placed.
DetectionSchedule build_schedule(const std::vector<std::size_t>& true_drifts, double precision,
                                 double recall, std::size_t stream_length, std::uint64_t seed,
                                 std::size_t min_gap = kTpWindow);

/// Empty schedule with no true drifts to hit either (MAGIC Net then never
/// leaves its plastic phase).
DetectionSchedule empty_schedule();

struct Measured {
  double precision = 1.0;
  double recall = 1.0;
  std::size_t true_positives = 0;
};

/// Greedy matching in time order: a detection is a TP when it lies in the
/// window of a drift not yet claimed. No detections gives precision 1.0; no
/// drifts gives recall 1.0.
Measured measure_schedule(const DetectionSchedule& schedule,
                          const std::vector<std::size_t>& true_drifts);

}  // namespace magicnet::detectors

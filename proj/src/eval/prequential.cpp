#include <algorithm>
#include <stdexcept>
#include <string>

#include "magicnet/eval.hpp"

namespace magicnet::eval {

std::vector<TestSet> extract_test_sets(const streams::LabeledStream& stream, std::size_t withheld) {
  std::vector<TestSet> sets;
  for (std::size_t c = 0; c < stream.concept_count(); ++c) {
    const std::size_t end = stream.concept_end(c);
    const std::size_t begin = std::max(stream.concept_starts[c], end - std::min(end, withheld));
    TestSet set;
    set.concept_index = c;
    set.first_t = begin;
    set.dim = stream.dim;
    set.x.assign(stream.x.begin() + static_cast<std::ptrdiff_t>(begin * stream.dim),
                 stream.x.begin() + static_cast<std::ptrdiff_t>(end * stream.dim));
    set.y.assign(stream.y.begin() + static_cast<std::ptrdiff_t>(begin),
                 stream.y.begin() + static_cast<std::ptrdiff_t>(end));
    sets.push_back(std::move(set));
  }
  return sets;
}

PrequentialReport run_prequential(learners::StreamLearner& learner,
                                  const streams::LabeledStream& stream,
                                  const detectors::DetectionSchedule& schedule,
                                  const PrequentialOptions& options) {
  const std::size_t n = stream.size();
  if (stream.concept_starts.empty() || stream.concept_starts.front() != 0) {
    throw std::invalid_argument("run_prequential: stream has no concept boundaries");
  }
  if (stream.dim != learner.config().input_dim) {
    throw std::invalid_argument("run_prequential: stream dim " + std::to_string(stream.dim) +
                                " does not match learner input dim " +
                                std::to_string(learner.config().input_dim));
  }
  const auto detections = schedule.timestamps();
  if (!std::is_sorted(detections.begin(), detections.end())) {
    throw std::invalid_argument("run_prequential: detection schedule is not sorted");
  }
  if (!detections.empty() && detections.back() >= n) {
    throw std::invalid_argument("run_prequential: detection at " +
                                std::to_string(detections.back()) +
                                " is outside a stream of " + std::to_string(n) + " points");
  }

  const std::size_t concepts = stream.concept_count();
  std::vector<std::size_t> scored_end(concepts);
  for (std::size_t c = 0; c < concepts; ++c) {
    const std::size_t begin = stream.concept_starts[c];
    const std::size_t end = stream.concept_end(c);
    if (end - begin <= options.withheld) {
      throw std::invalid_argument("run_prequential: concept " + std::to_string(c) + " has " +
                                  std::to_string(end - begin) + " points, not more than the " +
                                  std::to_string(options.withheld) + " withheld");
    }
    scored_end[c] = end - options.withheld;
  }

  PrequentialReport report;
  report.concepts.resize(concepts);
  for (std::size_t c = 0; c < concepts; ++c) report.concepts[c].concept_index = c;
  report.probabilities.reserve(n);
  const std::size_t start_span = options.start_batches * learner.config().batch_size;

  KappaAccumulator acc;
  std::size_t next_detection = 0;
  std::size_t c = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (c + 1 < concepts && t == stream.concept_starts[c + 1]) ++c;
    ConceptScore& score = report.concepts[c];

    bool detected = false;
    while (next_detection < detections.size() && detections[next_detection] == t) {
      detected = true;
      ++next_detection;
    }
    if (detected) {
      learner.on_drift_detected();
      acc.reset();
      ++report.detections_applied;
      if (score.anchor && !score.start && score.start_t && t < *score.start_t) {
        score.start_t.reset();  // window broken by a later reset
      }
      if (c >= 1 && !score.anchor) {
        score.anchor = t;
        if (t + start_span <= scored_end[c]) score.start_t = t + start_span;
      }
    }

    const auto x = stream.features(t);
    if (t < scored_end[c]) {
      const int y = stream.y[t];
      const double p = learner.predict(x);
      acc.add(p >= 0.5, y);
      report.probabilities.push_back(p);
      if (options.trace) report.trace.push_back({t, p, y, acc.kappa()});
      learner.learn_one(x, y);
      if (score.start_t && t + 1 == *score.start_t) score.start = acc.kappa();
      if (t + 1 == scored_end[c]) score.end = acc.kappa();
    } else {
      learner.advance(x);
    }

    if (t + 1 == stream.concept_end(c)) {
      report.checkpoints.push_back(learner.snapshot(c));
      report.parameter_counts.push_back(learner.parameter_count());
    }
  }

  double start_sum = 0.0;
  double end_sum = 0.0;
  for (std::size_t j = 1; j < concepts; ++j) {
    const auto& s = report.concepts[j];
    if (s.start) {
      start_sum += *s.start;
      ++report.start_count;
    }
    end_sum += s.end;
    ++report.end_count;
  }
  if (report.start_count > 0) report.start = start_sum / static_cast<double>(report.start_count);
  if (report.end_count > 0) report.end = end_sum / static_cast<double>(report.end_count);
  report.test_sets = extract_test_sets(stream, options.withheld);
  return report;
}

}  // namespace magicnet::eval

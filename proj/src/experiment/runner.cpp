#include <atomic>
#include <charconv>
#include <chrono>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "magicnet/experiment.hpp"

namespace magicnet::experiment {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return {buf, ptr};
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id) {
  // splitmix64 finaliser over the combined words
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream_id + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

enum SeedStream : std::uint64_t { kConfiguration = 1, kWalk = 2, kSchedule = 3, kLearner = 4 };

void write_file(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string seed_file(const char* stem, std::uint64_t seed, const char* ext = ".csv") {
  return std::string(stem) + "_seed" + std::to_string(seed) + ext;
}

std::string opt_size(const std::optional<std::size_t>& v) {
  return v ? std::to_string(*v) : std::string();
}

std::string opt_double(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::mutex log_mutex;

void log_line(const std::string& line) {
  std::lock_guard lock(log_mutex);
  std::cerr << line << '\n';
}

// Kept out of the result files so reruns stay byte-identical.
void log_elapsed(std::chrono::steady_clock::time_point since) {
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
  log_line("wall time " + format_double(seconds) + " s");
}

}  // namespace

streams::LabeledStream build_stream(const ExperimentConfig& config, std::uint64_t seed) {
  streams::LabeledStream stream;
  if (config.source.kind == SourceConfig::Kind::SineRW) {
    const auto cfg = streams::build_srw_configuration(config.n_concepts, config.concept_length,
                                                      derive_seed(seed, kConfiguration));
    stream = streams::sine_rw_generate(cfg, derive_seed(seed, kWalk));
  } else {
    const auto series = streams::ingest_csv(config.source.path, config.source.schema);
    const auto cfg = streams::build_real_configuration(series, config.source.spec, config.n_concepts,
                                                       config.concept_length,
                                                       derive_seed(seed, kConfiguration));
    stream = streams::materialize_real(series, cfg);
  }
  stream.seed = seed;
  return stream;
}

SeedRun run_on_stream(const ExperimentConfig& config, const streams::LabeledStream& source,
                      std::uint64_t seed, bool trace) {
  SeedRun run;
  run.seed = seed;
  run.stream = config.temporal_order > 0 ? streams::temporal_augment(source, config.temporal_order)
                                         : source;
  run.schedule = detectors::build_schedule(run.stream.drift_positions(), config.precision,
                                           config.recall, run.stream.size(),
                                           derive_seed(seed, kSchedule), config.min_gap);

  eval::PrequentialOptions options;
  options.withheld = config.withheld;
  options.start_batches = config.start_batches;
  options.trace = trace;

  for (auto kind : config.learners) {
    auto learner =
        learners::make_learner(kind, config.learner_config(run.stream.dim, derive_seed(seed, kLearner)));
    LearnerRun lr;
    lr.kind = kind;
    lr.prequential = eval::run_prequential(*learner, run.stream, run.schedule, options);
    lr.cl = eval::run_cl_eval(lr.prequential.checkpoints, lr.prequential.test_sets,
                              config.race_length);
    lr.avg = eval::avg_metric(lr.cl.r);
    lr.bwt = eval::bwt_metric(lr.cl.r);
    if (const auto* magic = dynamic_cast<const learners::MagicNet*>(learner.get())) {
      lr.expansions = magic->expansion_count();
    }
    if (const auto* cpnn = dynamic_cast<const learners::Cpnn*>(learner.get())) {
      lr.columns = cpnn->column_count();
    }
    run.learners.push_back(std::move(lr));
  }
  return run;
}

SeedRun run_seed(const ExperimentConfig& config, std::uint64_t seed, bool trace) {
  return run_on_stream(config, build_stream(config, seed), seed, trace);
}

fs::path summary_path(const fs::path& out, std::uint64_t seed) {
  return out / seed_file("summary", seed);
}

void write_seed_outputs(const SeedRun& run, const ExperimentConfig& config, const fs::path& out,
                        bool trace) {
  const std::string id = std::to_string(run.seed);

  std::ostringstream sched;
  sched << "t,tag\n";
  for (const auto& d : run.schedule.detections) sched << d.t << ',' << detectors::to_string(d.tag) << '\n';
  write_file(out / seed_file("schedule", run.seed), sched.str());

  std::ostringstream preq;
  preq << "configuration_id,learner,drift_index,anchor_t,start_t,start_kappa,end_kappa\n";
  std::ostringstream cl;
  cl << "configuration_id,learner,i,j,R,selected\n";
  std::ostringstream summary;
  summary << "configuration_id,learner,start,end,start_count,avg,bwt,bwt_defined,detections,"
             "expansions,columns,parameters\n";

  for (const auto& lr : run.learners) {
    const std::string name(learners::to_string(lr.kind));
    const auto& rep = lr.prequential;
    for (std::size_t c = 1; c < rep.concepts.size(); ++c) {
      const auto& s = rep.concepts[c];
      preq << id << ',' << name << ',' << c << ',' << opt_size(s.anchor) << ','
           << opt_size(s.start_t) << ',' << opt_double(s.start) << ',' << format_double(s.end)
           << '\n';
    }
    for (std::size_t i = 0; i < lr.cl.r.size(); ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        cl << id << ',' << name << ',' << i << ',' << j << ',' << format_double(lr.cl.r(i, j)) << ','
           << lr.cl.selected[i][j] << '\n';
      }
    }
    summary << id << ',' << name << ',' << format_double(rep.start) << ',' << format_double(rep.end)
            << ',' << rep.start_count << ',' << format_double(lr.avg) << ','
            << format_double(lr.bwt.value) << ',' << (lr.bwt.defined ? 1 : 0) << ','
            << rep.detections_applied << ',' << lr.expansions << ',' << lr.columns << ','
            << (rep.parameter_counts.empty() ? 0 : rep.parameter_counts.back()) << '\n';

    if (trace) {
      std::ostringstream tr;
      tr << "t,prediction,label,running_kappa\n";
      for (const auto& p : rep.trace) {
        tr << p.t << ',' << format_double(p.probability) << ',' << p.label << ','
           << format_double(p.running_kappa) << '\n';
      }
      write_file(out / ("trace_seed" + id + "_" + name + ".csv"), tr.str());
    }
    if (config.checkpoints) {
      const fs::path dir = out / "checkpoints" / ("seed" + id);
      fs::create_directories(dir);
      for (const auto& ckpt : rep.checkpoints) {
        eval::save_checkpoint(ckpt, dir / (name + "_concept" + std::to_string(ckpt.concept_index) +
                                           ".ckpt"));
      }
    }
  }
  write_file(out / seed_file("prequential", run.seed), preq.str());
  write_file(out / seed_file("cl", run.seed), cl.str());
  // Written last: its presence marks the seed as complete.
  write_file(summary_path(out, run.seed), summary.str());
}

namespace {

void write_manifest(const ExperimentConfig& config, const fs::path& out,
                    const std::vector<std::uint64_t>& seeds, const RunStatus& status,
                    const std::optional<fs::path>& replayed) {
  nlohmann::json m;
  m["format_version"] = kManifestFormatVersion;
  m["tool"] = "magicnet";
  m["tool_version"] = kToolVersion;
  m["config"] = to_json(config);
  m["seeds"] = seeds;
  m["completed"] = status.completed;
  m["resumed"] = status.resumed;
  if (replayed) m["replay"] = replayed->string();
  write_file(out / "manifest.json", m.dump(2) + "\n");
}

}  // namespace

RunStatus run(const ExperimentConfig& config, const RunOptions& options) {
  const auto clock_start = std::chrono::steady_clock::now();
  std::vector<std::uint64_t> seeds = config.seeds;
  if (options.seed_override) seeds = {*options.seed_override};
  fs::create_directories(options.out);

  RunStatus status;
  std::vector<std::uint64_t> pending;
  for (auto s : seeds) {
    if (fs::exists(summary_path(options.out, s))) {
      status.resumed.push_back(s);
      log_line("seed " + std::to_string(s) + ": already complete, skipped");
    } else {
      pending.push_back(s);
    }
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(pending.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < pending.size(); i = next++) {
      const auto seed = pending[i];
      try {
        log_line("seed " + std::to_string(seed) + ": running");
        const auto result = run_seed(config, seed, options.trace);
        write_seed_outputs(result, config, options.out, options.trace);
        log_line("seed " + std::to_string(seed) + ": done");
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(config.workers, pending.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (!errors[i]) status.completed.push_back(pending[i]);
  }
  write_manifest(config, options.out, seeds, status, std::nullopt);
  log_elapsed(clock_start);
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return status;
}

RunStatus replay(const fs::path& dump, const ExperimentConfig& config, const RunOptions& options) {
  const auto clock_start = std::chrono::steady_clock::now();
  const auto stream = streams::load_stream(dump);
  fs::create_directories(options.out);
  const auto result = run_on_stream(config, stream, stream.seed, options.trace);
  write_seed_outputs(result, config, options.out, options.trace);
  RunStatus status;
  status.completed.push_back(stream.seed);
  write_manifest(config, options.out, {stream.seed}, status, dump);
  log_elapsed(clock_start);
  return status;
}

}  // namespace magicnet::experiment

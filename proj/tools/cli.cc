/*
 * Copyright 2026 The semmap Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cli.h"

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "semmap/query_server.h"
#include "semmap/replay.h"
#include "semmap/simulator.h"
#include "semmap/snapshot_io.h"

namespace semmap::cli {
namespace {

namespace fs = std::filesystem;

std::atomic<bool> g_interrupted{false};

void OnSignal(int) { g_interrupted = true; }

// Marks which exit code a failure maps to.
struct Failure {
  int code;
  std::string message;
};

RunConfig LoadConfigOrDefault(const std::string& path) {
  if (path.empty()) return RunConfig{};
  try {
    return LoadRunConfig(path);
  } catch (const ConfigError& e) {
    throw Failure{kConfigError, e.what()};
  }
}

std::vector<LogRecord> LoadLog(const std::string& path) {
  if (!fs::exists(path)) {
    throw Failure{kLogError, "log file '" + path + "' does not exist"};
  }
  try {
    return ReadLogFile(path);
  } catch (const std::exception& e) {
    throw Failure{kLogError, "log '" + path + "': " + e.what()};
  }
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Failure{kIoError, "cannot write '" + path.string() + "'"};
  out << text;
  if (!out) throw Failure{kIoError, "write to '" + path.string() + "' failed"};
}

nlohmann::json ReadJsonFile(const std::string& path, int code) {
  std::ifstream in(path);
  if (!in) throw Failure{code, "cannot open '" + path + "'"};
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Failure{code, "'" + path + "': " + e.what()};
  }
}

class EventFileSink : public ReplaySink {
 public:
  explicit EventFileSink(const fs::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Failure{kIoError, "cannot write '" + path.string() + "'"};
  }

  void OnFrame(const std::shared_ptr<const ObjectMapSnapshot>&,
               std::span<const AssociationEvent> events) override {
    out_ << EventsToJsonLines(events);
  }

  void Close() {
    out_.close();
    if (!out_) throw Failure{kIoError, "write to '" + path_.string() + "' failed"};
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

// Publishes every snapshot, pacing frames by their stamps when speed > 0.
class PublishingSink : public ReplaySink {
 public:
  PublishingSink(std::shared_ptr<SnapshotBoard> board, double speed)
      : board_(std::move(board)), speed_(speed) {}

  void OnFrame(const std::shared_ptr<const ObjectMapSnapshot>& snapshot,
               std::span<const AssociationEvent>) override {
    if (speed_ > 0.0) {
      if (!first_stamp_) {
        first_stamp_ = snapshot->stamp;
        start_ = std::chrono::steady_clock::now();
      }
      const auto due =
          start_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                       std::chrono::duration<double>(
                           (snapshot->stamp - *first_stamp_) / speed_));
      std::this_thread::sleep_until(due);
    }
    board_->Publish(snapshot);
  }

 private:
  std::shared_ptr<SnapshotBoard> board_;
  double speed_;
  std::optional<double> first_stamp_;
  std::chrono::steady_clock::time_point start_;
};

int CmdReplay(const std::string& log_path, const std::string& config_path,
              const std::string& out_dir, std::ostream& out) {
  const RunConfig config = LoadConfigOrDefault(config_path);
  const std::vector<LogRecord> records = LoadLog(log_path);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw Failure{kIoError, "cannot create '" + out_dir + "': " + ec.message()};
  }
  const fs::path dir(out_dir);
  EventFileSink events(dir / "events.jsonl");
  ReplaySink* sinks[] = {&events};
  const ReplayResult result = Replay(records, config, sinks);
  events.Close();

  WriteText(dir / "snapshot.json",
            SnapshotToJson(*result.final_snapshot).dump(2) + "\n");
  WriteText(dir / "report.json", ReportToJson(result.report).dump(2) + "\n");
  try {
    ExportMap(result.grid, (dir / "map").string());
  } catch (const ExportError& e) {
    throw Failure{kIoError, e.what()};
  }
  out << "replayed " << result.report.records << " records: "
      << result.report.objects << " objects\n";
  return kOk;
}

int CmdSimulate(const std::string& scenario_path,
                const std::optional<uint64_t>& seed,
                const std::string& config_path, const std::string& out_path,
                std::ostream& out) {
  Scenario scenario;
  try {
    scenario = scenario_path.empty() ? DefaultLabScenario()
                                     : LoadScenario(scenario_path);
  } catch (const ScenarioError& e) {
    throw Failure{kConfigError, e.what()};
  }
  if (seed) scenario.seed = *seed;
  const RunConfig config = LoadConfigOrDefault(config_path);
  SyntheticRun run;
  try {
    run = SynthesizeLog(scenario, config);
  } catch (const ScenarioError& e) {
    throw Failure{kConfigError, e.what()};
  }
  WriteText(out_path, LogToText(run.records));
  WriteText(out_path + ".truth.json",
            GroundTruthToJson(run.truth).dump(2) + "\n");
  out << "wrote " << run.records.size() << " records to " << out_path << "\n";
  return kOk;
}

int CmdScore(const std::string& snapshot_path, const std::string& truth_path,
             double radius, std::ostream& out) {
  ObjectMapSnapshot snapshot;
  GroundTruth truth;
  try {
    snapshot = SnapshotFromJson(ReadJsonFile(snapshot_path, kLogError));
    truth = GroundTruthFromJson(ReadJsonFile(truth_path, kLogError));
  } catch (const std::runtime_error& e) {
    throw Failure{kLogError, e.what()};
  }
  out << MetricsToJson(ScoreRun(snapshot, truth, radius)).dump() << "\n";
  return kOk;
}

int CmdServe(const std::string& address, const std::string& snapshot_path,
             const std::string& log_path, const std::string& config_path,
             double speed, double duration, std::ostream& out) {
  auto board = std::make_shared<SnapshotBoard>();
  std::vector<LogRecord> records;
  RunConfig config;
  if (!snapshot_path.empty()) {
    try {
      board->Publish(std::make_shared<const ObjectMapSnapshot>(
          SnapshotFromJson(ReadJsonFile(snapshot_path, kLogError))));
    } catch (const std::runtime_error& e) {
      throw Failure{kLogError, e.what()};
    }
  } else if (!log_path.empty()) {
    config = LoadConfigOrDefault(config_path);
    records = LoadLog(log_path);
  }

  QueryServer server(board);
  try {
    const auto [host, port] = ParseAddress(address);
    server.Start(host, port);
  } catch (const ServerError& e) {
    throw Failure{kIoError, e.what()};
  }
  out << "listening on port " << server.port() << std::endl;

  std::signal(SIGINT, OnSignal);
  std::signal(SIGTERM, OnSignal);
  const auto start = std::chrono::steady_clock::now();
  if (!records.empty()) {
    PublishingSink publisher(board, speed);
    ReplaySink* sinks[] = {&publisher};
    const ReplayResult result = Replay(records, config, sinks);
    board->Publish(result.final_snapshot);
    out << "replay finished: " << result.report.objects << " objects"
        << std::endl;
  }
  while (!g_interrupted) {
    if (duration > 0.0 &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count() >= duration) {
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  server.Stop();
  return kOk;
}

}  // namespace

int Run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Object-level semantic mapping from sensor logs", "semmap"};
  app.require_subcommand(1);

  std::string log_path;
  std::string config_path;
  std::string out_path;
  std::string scenario_path;
  std::string snapshot_path;
  std::string truth_path;
  std::string address = "127.0.0.1:7070";
  std::optional<uint64_t> seed;
  double radius = 0.5;
  double speed = 0.0;
  double duration = 0.0;

  CLI::App* replay = app.add_subcommand("replay", "Replay a run log");
  replay->add_option("log", log_path, "Run log (JSON lines)")->required();
  replay->add_option("--config", config_path, "Run config (JSON)");
  replay->add_option("--out", out_path, "Output directory")->required();

  CLI::App* simulate =
      app.add_subcommand("simulate", "Generate a synthetic run log");
  simulate->add_option("scenario", scenario_path,
                       "Scenario (JSON); the built-in lab scene if omitted");
  simulate->add_option("--seed", seed, "Override the scenario seed");
  simulate->add_option("--config", config_path, "Run config (JSON)");
  simulate->add_option("--out", out_path, "Output log path")->required();

  CLI::App* score =
      app.add_subcommand("score", "Score a snapshot against ground truth");
  score->add_option("snapshot", snapshot_path, "Snapshot (JSON)")->required();
  score->add_option("truth", truth_path, "Ground truth (JSON)")->required();
  score->add_option("--radius", radius, "Match radius in meters");

  CLI::App* serve = app.add_subcommand("serve", "Serve the object layer");
  auto* serve_snapshot =
      serve->add_option("--snapshot", snapshot_path, "Serve a snapshot file");
  serve->add_option("--log", log_path, "Replay a log and serve it live")
      ->excludes(serve_snapshot);
  serve->add_option("--config", config_path, "Run config for --log");
  serve->add_option("--speed", speed,
                    "Replay speed factor for --log; 0 = as fast as possible");
  serve->add_option("--addr", address, "host:port to listen on");
  serve->add_option("--duration", duration,
                    "Stop after this many seconds; 0 = until interrupted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*replay) return CmdReplay(log_path, config_path, out_path, out);
    if (*simulate) {
      return CmdSimulate(scenario_path, seed, config_path, out_path, out);
    }
    if (*score) return CmdScore(snapshot_path, truth_path, radius, out);
    if (*serve) {
      return CmdServe(address, snapshot_path, log_path, config_path, speed,
                      duration, out);
    }
  } catch (const Failure& f) {
    err << "semmap: " << f.message << "\n";
    return f.code;
  }
  return kUsage;
}

}  // namespace semmap::cli

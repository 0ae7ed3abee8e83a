#pragma once

// Run directories, manifests and the background job queue.
//
// Layout of <root>/<run_id>/:
//   manifest.json   status, progress, warnings, artifact index (rewritten atomically)
//   scene.json      normalized scene
//   frames/<field>_<k>.csv, optional .png
//   history.csv, bands.json, grains.csv      meso runs
//   atoms.xyz                                lattice runs

#include "nanowb/scene.hpp"

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace nanowb {

namespace fs = std::filesystem;

/// Writes `text` to `path` through a temporary file and rename.
void write_file_atomic(const fs::path& path, const std::string& text);
std::string read_file(const fs::path& path);

Json read_manifest(const fs::path& run_dir);

/// Runs the scene into <root>/<scene_id>/ and returns the final manifest. Solver and
/// I/O failures are captured as status "failed" with the error text; they do not throw.
Json run_scene(const SceneSpec& scene, const fs::path& root, const std::function<void(double)>& progress = {});

/// Writes the initial "queued" manifest and scene.json for a run.
void prepare_run(const SceneSpec& scene, const fs::path& root);

std::string history_to_csv(const std::vector<HistoryRow>& rows);
Json bands_to_json(const std::vector<Band>& bands, const FieldFrame& intensity, const BandOptions& options);

/// Grain ids as a FieldFrame named "grain_id".
FieldFrame grain_frame(const Grid2D& grid, const GrainMap& grains);

class JobQueue {
 public:
  JobQueue(fs::path root, int workers = 1);
  ~JobQueue();
  JobQueue(const JobQueue&) = delete;
  JobQueue& operator=(const JobQueue&) = delete;

  /// Queues the scene unless a run with the same id is already queued, running or
  /// done. Returns the job (run) id.
  std::string submit(const SceneSpec& scene);
  /// Blocks until the job leaves queued/running. Returns false for unknown ids.
  bool wait(const std::string& id);
  const fs::path& root() const { return root_; }

 private:
  void worker();

  fs::path root_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  std::deque<std::pair<std::string, SceneSpec>> pending_;
  std::map<std::string, std::string> state_;  // id -> queued | running | done | failed
  std::vector<std::thread> threads_;
  bool stop_ = false;
};

}  // namespace nanowb

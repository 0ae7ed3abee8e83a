#pragma once

// JSON-over-HTTP API for scenes, jobs, results and lattice previews.
//
//   POST /api/v1/scenes                      201 {scene_id} | 422 {error, errors[]}
//   GET  /api/v1/scenes/{id}                 normalized scene | 404
//   POST /api/v1/jobs {scene_id}             202 {job_id} | 404 | 422
//   GET  /api/v1/jobs/{id}                   manifest | 404
//   GET  /api/v1/jobs/{id}/fields/{name}?frame=k
//   GET  /api/v1/jobs/{id}/history
//   GET  /api/v1/jobs/{id}/bands             result routes: 404 unknown, 409 not done
//   POST /api/v1/lattice/preview             atoms (<= 50000) | 413 | 422

#include "nanowb/runner.hpp"

#include <memory>
#include <string>

namespace nanowb {

inline constexpr std::size_t kPreviewCap = 50000;

class Service {
 public:
  Service(fs::path data_dir, int workers = 1);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Blocks serving on host:port until stop().
  bool listen(const std::string& host, int port);
  /// Binds to a free port and serves on a background thread; returns the port.
  int start_background(const std::string& host = "127.0.0.1");
  void stop();

  JobQueue& queue();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace nanowb

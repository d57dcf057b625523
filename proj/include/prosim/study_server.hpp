#pragma once

#include "prosim/error.hpp"
#include "prosim/study.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace prosim {

// HTTP front end for a StudyStore:
//   POST /api/session          {"rater_id": ...}            -> session
//   GET  /api/session/<id>                                  -> session
//   GET  /api/triad/<id>                                    -> clips + lexical form
//   GET  /api/audio/<clip_id>                               -> audio/wav
//   POST /api/judgment         {"triad_id", "rater_id", "chosen_pair"} -> 201
//   GET  /api/export                                        -> judgments JSONL
//   GET  /api/config                                        -> instructions, sizes
// Errors come back as {"error": <code>, "message": ...} with a matching status.
class StudyServer {
 public:
  explicit StudyServer(StudyStore& store, std::filesystem::path static_dir = {});
  ~StudyServer();
  StudyServer(const StudyServer&) = delete;
  StudyServer& operator=(const StudyServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws PortInUse.
  int bind(const std::string& host, int port);
  // Blocks until stop() is called from another thread.
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

int http_status(Errc code);

}  // namespace prosim

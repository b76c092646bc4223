#ifndef UADRIVE_TELEOP_HPP_
#define UADRIVE_TELEOP_HPP_

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "uadrive/environment.hpp"
#include "uadrive/episode_log.hpp"

namespace uadrive {

// One human-driven episode. The tick side (tick/abort) belongs to a single
// thread; submit_command may be called from any thread.
class TeleopSession {
 public:
  TeleopSession(const WorldConfig& world, const RewardParams& reward, std::uint64_t world_seed,
                int episode_index);

  // Parses {"type":"cmd","a_tilde":x}. Malformed or out-of-range commands
  // are dropped and counted. Returns whether the command was accepted.
  bool submit_command(std::string_view message);
  void submit_a_tilde(double a_tilde);

  // Applies the latest command (or holds the previous one) for one step and
  // returns the frame message. Throws std::logic_error once done.
  std::string tick();

  // Waits up to `timeout` for a command newer than the last tick.
  bool wait_for_command(std::chrono::milliseconds timeout);

  // Closes the episode as aborted unless it already terminated.
  void abort();

  bool done() const { return finished_; }
  std::string initial_frame() const;
  // {"type":"end",...}; only meaningful once done().
  std::string end_message() const;
  const EpisodeLog& log() const { return log_; }
  int warnings() const { return warnings_.load(); }
  double held_command() const { return held_; }

 private:
  std::string frame_json(const SemanticGrid& grid, double front_gap) const;

  DrivingEnv env_;
  EpisodeLog log_;
  double held_ = 0.0;
  bool finished_ = false;

  mutable std::mutex mutex_;
  std::condition_variable command_cv_;
  std::optional<double> pending_;
  std::atomic<int> warnings_{0};
};

// Length-prefixed framing used on the stream: "<decimal length>\n<payload>".
std::string frame_message(std::string_view payload);

struct TeleopOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  WorldConfig world;
  RewardParams reward;
  std::optional<std::filesystem::path> ui_dir;
  std::filesystem::path log_dir = "teleop_logs";
  int tick_ms = 50;  // wall-clock pacing; dt in real time by default
  // Advance exactly one step per received command instead of on a clock.
  bool lockstep = false;
  std::uint64_t seed = 1;
};

// HTTP front end:
//   POST   /session              -> {"session": id}
//   GET    /session/{id}/stream  -> chunked stream of framed messages
//   POST   /session/{id}/cmd     -> body {"type":"cmd","a_tilde":x}
//   DELETE /session/{id}         -> abort
// Static UI assets are served from ui_dir when given.
class TeleopServer {
 public:
  explicit TeleopServer(TeleopOptions options);
  ~TeleopServer();
  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;

  // Binds; port 0 picks a free port. Returns the bound port.
  int bind();
  // Blocks until stop().
  void listen();
  void stop();

  // Paths of the episode logs written so far.
  std::vector<std::filesystem::path> written_logs() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace uadrive

#endif  // UADRIVE_TELEOP_HPP_

#include "uadrive/teleop.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "uadrive/metrics.hpp"

namespace uadrive {

using nlohmann::json;

TeleopSession::TeleopSession(const WorldConfig& world, const RewardParams& reward,
                             std::uint64_t world_seed, int episode_index)
    : env_(world, reward, /*informed=*/false, CaseSpec::single(PerturbationCase::VEVV)) {
  env_.reset(world_seed, 0);
  log_.header = make_header(env_, 1, episode_index, "human");
  log_.observations.push_back(env_.observation());
}

bool TeleopSession::submit_command(std::string_view message) {
  double a_tilde = 0.0;
  try {
    const json j = json::parse(message);
    if (!j.is_object() || j.value("type", "") != "cmd" || !j.contains("a_tilde") ||
        !j.at("a_tilde").is_number())
      throw std::invalid_argument("not a command");
    a_tilde = j.at("a_tilde").get<double>();
  } catch (const std::exception&) {
    ++warnings_;
    return false;
  }
  if (!(a_tilde >= -1.0 && a_tilde <= 1.0)) {
    ++warnings_;
    return false;
  }
  submit_a_tilde(a_tilde);
  return true;
}

void TeleopSession::submit_a_tilde(double a_tilde) {
  {
    std::lock_guard lock(mutex_);
    pending_ = a_tilde;
  }
  command_cv_.notify_one();
}

bool TeleopSession::wait_for_command(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  return command_cv_.wait_for(lock, timeout, [&] { return pending_.has_value(); });
}

std::string TeleopSession::tick() {
  if (finished_) throw std::logic_error("TeleopSession::tick: episode is over");
  {
    std::lock_guard lock(mutex_);
    if (pending_) held_ = *pending_;
    pending_.reset();
  }
  const EnvStep step = env_.step(held_);
  record_step(log_, step, env_.world());
  if (env_.done()) {
    finish_log(log_, env_.world().status, env_.world().t);
    finished_ = true;
  }
  return frame_json(step.grid, step.front_gap);
}

void TeleopSession::abort() {
  if (finished_) return;
  finish_log(log_, EpisodeKind::aborted, env_.world().t);
  finished_ = true;
}

std::string TeleopSession::initial_frame() const {
  return frame_json(env_.grid(), front_gap_m(env_.world()));
}

std::string TeleopSession::frame_json(const SemanticGrid& grid, double front_gap) const {
  std::string bytes(kVisionSize, '\0');
  for (std::size_t i = 0; i < grid.cells.size(); ++i)
    bytes[i] = static_cast<char>(grayscale(grid.cells[i]));
  const WorldState& w = env_.world();
  json j = {{"type", "frame"},
            {"t", w.t},
            {"grid", httplib::detail::base64_encode(bytes)},
            {"velocity", w.ego().velocity_mps},
            {"front_gap", std::isfinite(front_gap) ? json(front_gap) : json(nullptr)},
            {"status", std::string(kind_name(w.status))}};
  return j.dump();
}

std::string TeleopSession::end_message() const {
  json metrics = json::object();
  if (!log_.steps.empty()) {
    const EpisodeMetrics m = episode_metrics(log_);
    metrics = {{"steps", m.steps},
               {"traveled_distance_m", m.traveled_distance_m},
               {"brake_steps", m.brake_steps},
               {"throttle_steps", m.throttle_steps},
               {"mean_velocity", m.mean_velocity},
               {"cumulative_reward", m.cumulative_reward}};
    if (std::isfinite(m.brake_to_throttle_ratio))
      metrics["brake_to_throttle_ratio"] = m.brake_to_throttle_ratio;
  } else {
    metrics = {{"steps", 0}};
  }
  metrics["warnings"] = warnings();
  return json{{"type", "end"}, {"kind", std::string(kind_name(log_.kind))}, {"metrics", metrics}}
      .dump();
}

std::string frame_message(std::string_view payload) {
  return std::to_string(payload.size()) + "\n" + std::string(payload);
}

namespace {

constexpr const char* kPlaceholderPage =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>uadrive teleop</title></head>"
    "<body><p>The teleop service is running. Start it with --ui-dir pointing at the built "
    "browser UI to drive interactively.</p></body></html>";

struct Slot {
  Slot(const TeleopOptions& o, std::uint64_t seed, int index)
      : session(o.world, o.reward, seed, index) {}
  TeleopSession session;
  std::mutex tick_mutex;  // held by whoever advances or closes the world
  std::atomic<bool> streaming{false};
  std::atomic<bool> close_requested{false};
  bool finalized = false;
  std::string id;
};

}  // namespace

struct TeleopServer::Impl {
  TeleopOptions options;
  httplib::Server server;
  std::mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<Slot>> sessions;
  int next_index = 0;
  mutable std::mutex logs_mutex;
  std::vector<std::filesystem::path> logs;

  std::shared_ptr<Slot> find(const std::string& id) {
    std::lock_guard lock(sessions_mutex);
    auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second;
  }

  // Caller holds slot.tick_mutex.
  void finalize(Slot& slot) {
    if (slot.finalized) return;
    slot.session.abort();
    slot.finalized = true;
    if (slot.session.log().steps.empty()) return;
    std::filesystem::create_directories(options.log_dir);
    const auto path = options.log_dir / ("human_session_" + slot.id + ".jsonl");
    write_episode_log(slot.session.log(), path);
    std::lock_guard lock(logs_mutex);
    logs.push_back(path);
  }

  void routes() {
    server.Post("/session", [this](const httplib::Request&, httplib::Response& res) {
      std::shared_ptr<Slot> slot;
      {
        std::lock_guard lock(sessions_mutex);
        const int index = next_index++;
        slot = std::make_shared<Slot>(options,
                                      derive_seed(options.seed, "teleop", static_cast<std::uint64_t>(index)),
                                      index);
        slot->id = std::to_string(index);
        sessions[slot->id] = slot;
      }
      res.set_content(json{{"session", slot->id}}.dump(), "application/json");
    });

    server.Post("/session/:id/cmd", [this](const httplib::Request& req, httplib::Response& res) {
      auto slot = find(req.path_params.at("id"));
      if (!slot) {
        res.status = 404;
        return;
      }
      res.status = slot->session.submit_command(req.body) ? 204 : 400;
    });

    server.Delete("/session/:id", [this](const httplib::Request& req, httplib::Response& res) {
      auto slot = find(req.path_params.at("id"));
      if (!slot) {
        res.status = 404;
        return;
      }
      slot->close_requested = true;
      if (!slot->streaming) {
        std::lock_guard lock(slot->tick_mutex);
        finalize(*slot);
      }
      res.status = 204;
    });

    server.Get("/session/:id/stream", [this](const httplib::Request& req, httplib::Response& res) {
      auto slot = find(req.path_params.at("id"));
      if (!slot) {
        res.status = 404;
        return;
      }
      if (slot->streaming.exchange(true)) {
        res.status = 409;
        return;
      }
      struct StreamState {
        bool sent_initial = false;
        bool sent_end = false;
        std::chrono::steady_clock::time_point next_tick;
      };
      auto state = std::make_shared<StreamState>();
      res.set_chunked_content_provider(
          "application/octet-stream",
          [this, slot, state](std::size_t, httplib::DataSink& sink) {
            std::lock_guard lock(slot->tick_mutex);
            auto send = [&](const std::string& payload) {
              const std::string msg = frame_message(payload);
              return sink.write(msg.data(), msg.size());
            };
            if (!state->sent_initial) {
              state->sent_initial = true;
              state->next_tick = std::chrono::steady_clock::now();
              return send(slot->session.initial_frame());
            }
            if (slot->session.done() || slot->close_requested) {
              finalize(*slot);
              if (!state->sent_end) {
                state->sent_end = true;
                send(slot->session.end_message());
              }
              sink.done();
              return true;
            }
            if (options.lockstep) {
              if (!slot->session.wait_for_command(std::chrono::milliseconds(200))) {
                return sink.is_writable();
              }
            } else {
              state->next_tick += std::chrono::milliseconds(options.tick_ms);
              std::this_thread::sleep_until(state->next_tick);
            }
            return send(slot->session.tick());
          },
          [this, slot](bool) {
            std::lock_guard lock(slot->tick_mutex);
            finalize(*slot);
            slot->streaming = false;
          });
    });

    if (options.ui_dir) {
      server.set_mount_point("/", options.ui_dir->string());
    } else {
      server.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(kPlaceholderPage, "text/html");
      });
    }
  }
};

TeleopServer::TeleopServer(TeleopOptions options) : impl_(std::make_unique<Impl>()) {
  if (options.tick_ms < 0) throw std::invalid_argument("tick_ms must be >= 0");
  options.world.validate();
  options.reward.validate();
  if (options.ui_dir && !std::filesystem::is_directory(*options.ui_dir))
    throw std::invalid_argument("ui directory not found: " + options.ui_dir->string());
  impl_->options = std::move(options);
  impl_->routes();
}

TeleopServer::~TeleopServer() { stop(); }

int TeleopServer::bind() {
  if (impl_->options.port == 0) {
    const int port = impl_->server.bind_to_any_port(impl_->options.host);
    if (port < 0) throw std::runtime_error("cannot bind a free port");
    return port;
  }
  if (!impl_->server.bind_to_port(impl_->options.host, impl_->options.port))
    throw std::runtime_error("cannot bind port " + std::to_string(impl_->options.port));
  return impl_->options.port;
}

void TeleopServer::listen() { impl_->server.listen_after_bind(); }

void TeleopServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

std::vector<std::filesystem::path> TeleopServer::written_logs() const {
  std::lock_guard lock(impl_->logs_mutex);
  return impl_->logs;
}

}  // namespace uadrive

#ifndef CASUALGAZE_DEMO_SERVICE_H_
#define CASUALGAZE_DEMO_SERVICE_H_

// Live selection sessions over a WebSocket. Every message is a JSON object
// with a "type" field.
//
// client -> server
//   hello         {scene?, seed?}             must be the first message
//   gaze          {t, phi, theta, head_yaw?}  seconds, degrees
//   confirm       {t}
//   set_technique {name}                      precise | knn | casualgaze
//   set_scene     {name}                      built-in scene name
//
// server -> client
//   scene      {session_id, scene, config}
//   task       {target_id, name}
//   prediction {winner, stable, votes, scores, candidates, predicted_gaze}
//   result     {correct, dt?, ct?, st?, error_count, target_id, winner}
//   ack        {technique}
//   error      {code, message}
//
// Each inbound message produces its replies before the next one is read; the
// server never pushes between frames.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "casualgaze/evaluation.h"
#include "casualgaze/recognizer.h"
#include "casualgaze/scene.h"
#include "casualgaze/scene_io.h"
#include "casualgaze/simulator.h"

namespace casualgaze {

struct ServiceConfig {
  Scene scene;
  CoefficientSet coeffs;
  int stability_n = 3;
  std::uint64_t seed = 1;
  Technique technique = Technique::kCasualGaze;
  // When set, every task result is appended as one JSON line.
  std::optional<std::filesystem::path> metrics_log;
};

// Protocol state for one client. Transport independent; the server feeds it
// decoded messages and sends back whatever it returns.
class Session {
 public:
  Session(int id, const ServiceConfig& config);
  ~Session();

  std::vector<nlohmann::json> Handle(const nlohmann::json& msg);
  std::vector<nlohmann::json> HandleText(std::string_view text);

  // True once the session hit a fatal protocol error; the transport should
  // close after sending the final replies.
  bool closed() const { return closed_; }
  int id() const { return id_; }
  int dropped_frames() const { return dropped_frames_; }
  Technique technique() const { return technique_; }
  std::optional<int> current_target() const;
  const std::vector<TrialOutcome>& outcomes() const { return outcomes_; }

 private:
  struct Task {
    int index = 0;
    int target_id = 0;
    std::optional<double> start_t;
    std::vector<GazeSample> samples;
    std::vector<Prediction> predictions;
  };

  std::vector<nlohmann::json> OnHello(const nlohmann::json& msg);
  nlohmann::json OnGaze(const nlohmann::json& msg);
  std::vector<nlohmann::json> OnConfirm(const nlohmann::json& msg);
  nlohmann::json OnSetTechnique(const nlohmann::json& msg);
  std::vector<nlohmann::json> OnSetScene(const nlohmann::json& msg);

  void ResetRecognizer();
  nlohmann::json SceneMessage() const;
  nlohmann::json NextTask();
  nlohmann::json Fail(std::string_view code, std::string_view message,
                      bool fatal);
  void AppendMetrics(const nlohmann::json& result) const;

  int id_;
  const ServiceConfig& config_;
  std::shared_ptr<const Scene> scene_;
  Technique technique_;
  std::unique_ptr<Recognizer> recognizer_;
  std::optional<Task> task_;
  int task_count_ = 0;
  Rng rng_;
  bool greeted_ = false;
  bool closed_ = false;
  int dropped_frames_ = 0;
  std::vector<TrialOutcome> outcomes_;
};

// WebSocket server; one thread per connection, one Session per connection.
class DemoServer {
 public:
  explicit DemoServer(ServiceConfig config);
  ~DemoServer();

  // Binds and listens. Port 0 picks a free port. Throws Error(kIo) when the
  // address cannot be bound. Returns the bound port.
  unsigned short Listen(const std::string& address, unsigned short port);

  // Accepts connections until Stop(). Joins all session threads on return.
  void Run();

  // Safe to call from any thread.
  void Stop();

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace casualgaze

#endif  // CASUALGAZE_DEMO_SERVICE_H_

#include "casualgaze/demo_service.h"

#include <sys/socket.h>

#include <atomic>
#include <fstream>
#include <list>
#include <mutex>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "casualgaze/error.h"

namespace casualgaze {

using nlohmann::json;

namespace {

json Message(std::string_view type) { return json{{"type", type}}; }

std::optional<double> NumberField(const json& msg, const char* key) {
  if (!msg.contains(key) || !msg.at(key).is_number()) return std::nullopt;
  return msg.at(key).get<double>();
}

}  // namespace

Session::Session(int id, const ServiceConfig& config)
    : id_(id),
      config_(config),
      scene_(std::make_shared<const Scene>(config.scene)),
      technique_(config.technique),
      rng_(MakeStream(config.seed, static_cast<std::uint64_t>(id))) {
  ResetRecognizer();
}

Session::~Session() = default;

std::optional<int> Session::current_target() const {
  if (!task_) return std::nullopt;
  return task_->target_id;
}

void Session::ResetRecognizer() {
  RecognizerConfig cfg;
  cfg.coeffs = config_.coeffs.coeffs;
  cfg.device_models = config_.coeffs.device_models;
  cfg.stability_n = config_.stability_n;
  cfg.technique = technique_;
  recognizer_ = std::make_unique<Recognizer>(*scene_, std::move(cfg));
}

json Session::Fail(std::string_view code, std::string_view message,
                   bool fatal) {
  if (fatal) closed_ = true;
  json e = Message("error");
  e["code"] = code;
  e["message"] = message;
  return e;
}

std::vector<json> Session::HandleText(std::string_view text) {
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::exception&) {
    return {Fail("bad_message", "message is not valid JSON", !greeted_)};
  }
  return Handle(msg);
}

std::vector<json> Session::Handle(const json& msg) {
  if (closed_) return {};
  if (!msg.is_object() || !msg.contains("type") || !msg.at("type").is_string())
    return {Fail("bad_message", "message needs a string 'type' field",
                 !greeted_)};
  const std::string type = msg.at("type").get<std::string>();
  if (!greeted_) {
    if (type == "hello") return OnHello(msg);
    if (type == "confirm")
      return {Fail("no_task", "confirm received before any task", true)};
    return {Fail("protocol", "expected hello as the first message", true)};
  }
  if (type == "gaze") return {OnGaze(msg)};
  if (type == "confirm") return OnConfirm(msg);
  if (type == "set_technique") return {OnSetTechnique(msg)};
  if (type == "set_scene") return OnSetScene(msg);
  if (type == "hello") return {Fail("protocol", "duplicate hello", false)};
  return {Fail("unknown_type", "unknown message type " + type, false)};
}

json Session::SceneMessage() const {
  json m = Message("scene");
  m["session_id"] = id_;
  m["scene"] = SceneToJson(*scene_);
  m["config"] = {{"technique", TechniqueName(technique_)},
                 {"stability_n", config_.stability_n},
                 {"coeffs", CoefficientsToJson({config_.coeffs.coeffs, {}})}};
  return m;
}

json Session::NextTask() {
  const auto& devices = scene_->devices;
  std::uniform_int_distribution<size_t> pick(0, devices.size() - 1);
  const Device& target = devices[pick(rng_)];
  task_ = Task{++task_count_, target.id, std::nullopt, {}, {}};
  // Each task is scored like an independent trial.
  recognizer_->Reset();
  json m = Message("task");
  m["target_id"] = target.id;
  m["name"] = target.name;
  return m;
}

std::vector<json> Session::OnHello(const json& msg) {
  if (msg.contains("seed")) {
    const json& seed = msg.at("seed");
    if (!seed.is_number_unsigned() &&
        !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0))
      return {Fail("bad_hello", "seed must be a nonnegative integer", true)};
    rng_ = MakeStream(msg.at("seed").get<std::uint64_t>(),
                      static_cast<std::uint64_t>(id_));
  }
  if (msg.contains("scene")) {
    if (!msg.at("scene").is_string())
      return {Fail("bad_hello", "scene must be a built-in scene name", true)};
    auto scene = BuiltinScene(msg.at("scene").get<std::string>());
    if (!scene) return {Fail("bad_hello", "unknown scene", true)};
    scene_ = std::make_shared<const Scene>(std::move(*scene));
    ResetRecognizer();
  }
  greeted_ = true;
  return {SceneMessage(), NextTask()};
}

json Session::OnGaze(const json& msg) {
  const auto t = NumberField(msg, "t");
  const auto phi = NumberField(msg, "phi");
  const auto theta = NumberField(msg, "theta");
  if (!t || !phi || !theta)
    return Fail("bad_message", "gaze needs numeric t, phi and theta", false);
  const UserPose& user = scene_->user;
  GazeSample s;
  s.t = *t;
  s.gaze_dir = ToDirection(Angular{*phi, std::clamp(*theta, -90.0, 90.0)});
  s.eye_pos = user.eye_pos;
  s.head_pos = user.head_pos;
  s.head_forward = user.head_forward;
  if (const auto yaw = NumberField(msg, "head_yaw")) {
    const Angular forward = ToAngular(user.head_forward);
    s.head_forward = ToDirection(Angular{*yaw, forward.theta});
  }

  Prediction p;
  try {
    p = recognizer_->RecognizeFrame(s);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNonMonotonicTimestamp) throw;
    ++dropped_frames_;
    json err = Fail("stale_frame", "gaze timestamp does not advance", false);
    err["dropped"] = dropped_frames_;
    return err;
  }
  if (task_) {
    if (!task_->start_t) task_->start_t = s.t;
    task_->samples.push_back(s);
    task_->predictions.push_back(p);
  }
  json m = PredictionToJson(p);
  m["type"] = "prediction";
  return m;
}

std::vector<json> Session::OnConfirm(const json& msg) {
  if (!task_) return {Fail("no_task", "no active task to confirm", false)};
  const auto t = NumberField(msg, "t");
  if (!t) return {Fail("bad_message", "confirm needs numeric t", false)};

  TrialRecord trial;
  trial.trial_id = task_->index;
  trial.target_id = task_->target_id;
  trial.start_t = task_->start_t.value_or(*t);
  trial.confirm_t = *t;
  trial.samples = task_->samples;
  const TrialOutcome outcome =
      ScoreTrial(trial, task_->predictions, technique_,
                 ClassifyDeviceCase(scene_->Get(trial.target_id), *scene_,
                                    config_.coeffs.coeffs.gate_gaze));
  outcomes_.push_back(outcome);

  json r = Message("result");
  r["target_id"] = outcome.target_id;
  r["winner"] = outcome.final_winner ? json(*outcome.final_winner) : json(nullptr);
  r["correct"] = outcome.correct;
  if (auto v = outcome.dt()) r["dt"] = *v;
  if (auto v = outcome.ct()) r["ct"] = *v;
  if (auto v = outcome.st()) r["st"] = *v;
  r["error_count"] = outcome.error_count;
  r["technique"] = TechniqueName(technique_);
  AppendMetrics(r);
  return {r, NextTask()};
}

json Session::OnSetTechnique(const json& msg) {
  if (!msg.contains("name") || !msg.at("name").is_string())
    return Fail("bad_message", "set_technique needs a name", false);
  const std::string name = msg.at("name").get<std::string>();
  const auto technique = ParseTechnique(name);
  if (!technique || *technique == Technique::kSpecific)
    return Fail("unknown_technique",
                "unknown technique '" + name +
                    "'; expected precise, knn or casualgaze",
                false);
  technique_ = *technique;
  ResetRecognizer();
  if (task_) {
    task_->start_t.reset();
    task_->samples.clear();
    task_->predictions.clear();
  }
  json ack = Message("ack");
  ack["technique"] = name;
  return ack;
}

std::vector<json> Session::OnSetScene(const json& msg) {
  if (!msg.contains("name") || !msg.at("name").is_string())
    return {Fail("bad_message", "set_scene needs a name", false)};
  auto scene = BuiltinScene(msg.at("name").get<std::string>());
  if (!scene) return {Fail("unknown_scene", "unknown scene", false)};
  scene_ = std::make_shared<const Scene>(std::move(*scene));
  ResetRecognizer();
  return {SceneMessage(), NextTask()};
}

void Session::AppendMetrics(const json& result) const {
  if (!config_.metrics_log) return;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::ofstream out(*config_.metrics_log, std::ios::app);
  json line = result;
  line["session_id"] = id_;
  out << line.dump() << "\n";
}

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

class DemoServer::Impl {
 public:
  explicit Impl(ServiceConfig config)
      : config_(std::move(config)), acceptor_(ioc_) {}

  unsigned short Listen(const std::string& address, unsigned short port) {
    beast::error_code ec;
    const auto addr = asio::ip::make_address(address, ec);
    if (ec) throw Error(ErrorCode::kIo, "bad listen address " + address);
    const tcp::endpoint endpoint(addr, port);
    acceptor_.open(endpoint.protocol(), ec);
    if (!ec) acceptor_.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(endpoint, ec);
    if (!ec) acceptor_.listen(asio::socket_base::max_listen_connections, ec);
    if (ec)
      throw Error(ErrorCode::kIo, "cannot listen on " + address + ":" +
                                      std::to_string(port) + ": " +
                                      ec.message());
    return acceptor_.local_endpoint().port();
  }

  void Run() {
    while (!stopping_) {
      tcp::socket socket(ioc_);
      beast::error_code ec;
      acceptor_.accept(socket, ec);
      if (stopping_) break;
      if (ec) continue;
      std::lock_guard<std::mutex> lock(mu_);
      const int id = ++next_session_;
      auto conn = std::make_shared<Connection>(std::move(socket));
      connections_.push_back(conn);
      threads_.emplace_back([this, conn, id] { Serve(*conn, id); });
    }
    std::list<std::thread> threads;
    {
      std::lock_guard<std::mutex> lock(mu_);
      for (auto& c : connections_) c->Shutdown();
      threads.swap(threads_);
    }
    for (auto& t : threads) t.join();
  }

  void Stop() {
    if (stopping_.exchange(true)) return;
    // Wakes the blocking accept().
    ::shutdown(acceptor_.native_handle(), SHUT_RDWR);
    std::lock_guard<std::mutex> lock(mu_);
    for (auto& c : connections_) c->Shutdown();
  }

 private:
  struct Connection {
    explicit Connection(tcp::socket s) : ws(std::move(s)) {}
    void Shutdown() { ::shutdown(ws.next_layer().native_handle(), SHUT_RDWR); }
    websocket::stream<tcp::socket> ws;
  };

  void Serve(Connection& conn, int id) {
    beast::error_code ec;
    conn.ws.accept(ec);
    if (ec) return;
    conn.ws.text(true);
    Session session(id, config_);
    beast::flat_buffer buffer;
    while (!stopping_) {
      buffer.clear();
      conn.ws.read(buffer, ec);
      if (ec) break;
      std::vector<json> replies;
      try {
        replies = session.HandleText(beast::buffers_to_string(buffer.data()));
      } catch (const std::exception& e) {
        replies = {json{{"type", "error"}, {"code", "internal"},
                        {"message", e.what()}}};
      }
      for (const json& r : replies) {
        conn.ws.write(asio::buffer(r.dump()), ec);
        if (ec) break;
      }
      if (ec || session.closed()) break;
    }
    if (!ec) conn.ws.close(websocket::close_code::normal, ec);
  }

  ServiceConfig config_;
  asio::io_context ioc_;
  tcp::acceptor acceptor_;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::vector<std::shared_ptr<Connection>> connections_;
  std::list<std::thread> threads_;
  int next_session_ = 0;
};

DemoServer::DemoServer(ServiceConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

DemoServer::~DemoServer() = default;

unsigned short DemoServer::Listen(const std::string& address,
                                  unsigned short port) {
  return impl_->Listen(address, port);
}

void DemoServer::Run() { impl_->Run(); }

void DemoServer::Stop() { impl_->Stop(); }

}  // namespace casualgaze

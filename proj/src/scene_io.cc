#include "casualgaze/scene_io.h"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "casualgaze/error.h"
#include "casualgaze/recognizer.h"
#include "casualgaze/trial_log.h"

namespace casualgaze {

using nlohmann::json;

namespace {

json VecToJson(const Vec3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3d VecFromJson(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw Error(ErrorCode::kParseError,
                std::string(what) + " must be an array of 3 numbers");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

void CheckSchema(const json& doc, std::string_view expected) {
  if (!doc.is_object() || !doc.contains("schema"))
    throw Error(ErrorCode::kParseError, "document has no schema field");
  const std::string schema = doc.at("schema").get<std::string>();
  if (schema != expected)
    throw Error(ErrorCode::kSchemaVersionMismatch,
                "expected schema " + std::string(expected) + ", got " + schema);
}

json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::kNotFound, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

void WriteJsonFile(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << doc.dump(2) << "\n";
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

// Rewraps nlohmann type errors as parse errors.
template <typename Fn>
auto Parsing(const char* what, Fn fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string(what) + ": " + e.what());
  }
}

}  // namespace

json SceneToJson(const Scene& scene) {
  json devices = json::array();
  for (const Device& d : scene.devices) {
    devices.push_back({{"id", d.id},
                       {"name", d.name},
                       {"position", VecToJson(d.position)},
                       {"radius", d.radius}});
  }
  json doc = {
      {"schema", kSceneSchema},
      {"convention",
       "meters; +x right, +y up, +z forward; phi rightward, theta upward, "
       "degrees"},
      {"name", scene.name},
      {"approximation", scene.approximation},
      {"user",
       {{"eye_pos", VecToJson(scene.user.eye_pos)},
        {"head_pos", VecToJson(scene.user.head_pos)},
        {"head_forward", VecToJson(scene.user.head_forward)}}},
      {"devices", devices},
  };
  if (!scene.contexts.empty()) doc["contexts"] = scene.contexts;
  return doc;
}

Scene SceneFromJson(const json& doc, std::vector<std::string>* warnings) {
  CheckSchema(doc, kSceneSchema);
  Scene scene = Parsing("scene", [&] {
    Scene s;
    s.name = doc.value("name", std::string("unnamed"));
    s.approximation = doc.value("approximation", false);
    if (doc.contains("user")) {
      const json& u = doc.at("user");
      s.user.eye_pos = VecFromJson(u.at("eye_pos"), "user.eye_pos");
      s.user.head_pos = u.contains("head_pos")
                            ? VecFromJson(u.at("head_pos"), "user.head_pos")
                            : s.user.eye_pos;
      s.user.head_forward =
          VecFromJson(u.at("head_forward"), "user.head_forward");
    }
    for (const json& d : doc.at("devices")) {
      s.devices.push_back(Device{d.at("id").get<int>(),
                                 d.value("name", std::string()),
                                 VecFromJson(d.at("position"), "position"),
                                 d.at("radius").get<double>()});
    }
    if (doc.contains("contexts"))
      s.contexts = doc.at("contexts").get<std::vector<std::vector<int>>>();
    return s;
  });
  scene.Validate(warnings);
  return scene;
}

Scene LoadScene(const std::filesystem::path& path,
                std::vector<std::string>* warnings) {
  return SceneFromJson(ReadJsonFile(path), warnings);
}

void SaveScene(const Scene& scene, const std::filesystem::path& path) {
  WriteJsonFile(SceneToJson(scene), path);
}

Scene ResolveScene(const std::string& spec,
                   std::vector<std::string>* warnings) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(spec, ec)) return LoadScene(spec, warnings);
  if (auto builtin = BuiltinScene(spec)) return *builtin;
  throw Error(ErrorCode::kNotFound,
              "scene not found: " + spec +
                  " (not a file and not a built-in scene name)");
}

std::string_view SizeNormModeName(SizeNormMode mode) {
  return mode == SizeNormMode::kAsPrinted ? "as_printed" : "apparent";
}

SizeNormMode ParseSizeNormMode(std::string_view name) {
  if (name == "as_printed") return SizeNormMode::kAsPrinted;
  if (name == "apparent") return SizeNormMode::kApparent;
  throw Error(ErrorCode::kParseError,
              "unknown size_norm_mode " + std::string(name));
}

json CoefficientsToJson(const CoefficientSet& set) {
  const BehaviorCoefficients& c = set.coeffs;
  auto line = [](const MeanShiftLine& l) {
    return json{{"a", l.a}, {"b", l.b}};
  };
  auto plane = [](const StdPlane& p) {
    return json{{"a", p.a}, {"b", p.b}, {"c", p.c}};
  };
  json doc = {
      {"schema", kCoeffsSchema},
      {"mean_shift",
       {{"phi", line(c.mean_shift.phi)}, {"theta", line(c.mean_shift.theta)}}},
      {"std_plane",
       {{"phi", plane(c.std_plane.phi)}, {"theta", plane(c.std_plane.theta)}}},
      {"isolated_std", c.isolated_std},
      {"gate_head", c.gate_head},
      {"gate_gaze", c.gate_gaze},
      {"size_norm_mode", SizeNormModeName(c.size_norm_mode)},
  };
  if (!set.device_models.empty()) {
    json models = json::array();
    for (const auto& [id, g] : set.device_models) {
      models.push_back({{"id", id},
                        {"mean_phi", g.mean.dphi},
                        {"mean_theta", g.mean.dtheta},
                        {"std_phi", g.std_phi},
                        {"std_theta", g.std_theta}});
    }
    doc["device_models"] = std::move(models);
  }
  return doc;
}

CoefficientSet CoefficientsFromJson(const json& doc) {
  CheckSchema(doc, kCoeffsSchema);
  CoefficientSet set = Parsing("coefficients", [&] {
    CoefficientSet s;
    BehaviorCoefficients& c = s.coeffs;
    auto line = [](const json& j) {
      return MeanShiftLine{j.at("a").get<double>(), j.at("b").get<double>()};
    };
    auto plane = [](const json& j) {
      return StdPlane{j.at("a").get<double>(), j.at("b").get<double>(),
                      j.at("c").get<double>()};
    };
    c.mean_shift.phi = line(doc.at("mean_shift").at("phi"));
    c.mean_shift.theta = line(doc.at("mean_shift").at("theta"));
    c.std_plane.phi = plane(doc.at("std_plane").at("phi"));
    c.std_plane.theta = plane(doc.at("std_plane").at("theta"));
    c.isolated_std = doc.at("isolated_std").get<double>();
    c.gate_head = doc.value("gate_head", 96.0);
    c.gate_gaze = doc.value("gate_gaze", 17.18);
    c.size_norm_mode =
        ParseSizeNormMode(doc.value("size_norm_mode", std::string("as_printed")));
    if (doc.contains("device_models")) {
      for (const json& m : doc.at("device_models")) {
        s.device_models[m.at("id").get<int>()] = Gaussian::Make(
            {m.at("mean_phi").get<double>(), m.at("mean_theta").get<double>()},
            m.at("std_phi").get<double>(), m.at("std_theta").get<double>());
      }
    }
    return s;
  });
  set.coeffs.Validate();
  return set;
}

CoefficientSet LoadCoefficients(const std::filesystem::path& path) {
  return CoefficientsFromJson(ReadJsonFile(path));
}

void SaveCoefficients(const CoefficientSet& set,
                      const std::filesystem::path& path) {
  WriteJsonFile(CoefficientsToJson(set), path);
}

std::string FormatDouble(double v) { return fmt::format("{}", v); }

namespace {

std::vector<std::string_view> SplitFields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  size_t begin = 0;
  while (true) {
    const size_t end = line.find(sep, begin);
    out.push_back(line.substr(begin, end - begin));
    if (end == std::string_view::npos) break;
    begin = end + 1;
  }
  return out;
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

template <typename T>
T ParseNumber(std::string_view field, const char* what) {
  field = Trim(field);
  T value{};
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw Error(ErrorCode::kParseError,
                std::string("bad ") + what + " '" + std::string(field) + "'");
  return value;
}

bool IsSkippable(std::string_view line) {
  line = Trim(line);
  if (line.empty() || line.front() == '#') return true;
  // Every header this module writes leads with one of these columns.
  const std::string_view first = line.substr(0, line.find(','));
  return first == "trial_id" || first == "t";
}

}  // namespace

void WriteEndpointHeader(std::ostream& out) {
  out << "trial_id,target_id,gaze_phi,gaze_theta,timestamp_ms,context\n";
}

void WriteEndpointRow(std::ostream& out, const EndpointRow& row) {
  out << row.trial_id << ',' << row.target_id << ','
      << FormatDouble(row.gaze.phi) << ',' << FormatDouble(row.gaze.theta) << ','
      << FormatDouble(row.timestamp_ms) << ',';
  for (size_t i = 0; i < row.context.size(); ++i) {
    if (i) out << ';';
    out << row.context[i];
  }
  out << '\n';
}

std::vector<EndpointRow> ReadEndpoints(std::istream& in) {
  std::vector<EndpointRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (IsSkippable(line)) continue;
    try {
      const auto f = SplitFields(Trim(line), ',');
      if (f.size() != 5 && f.size() != 6)
        throw Error(ErrorCode::kParseError, "expected 5 or 6 fields");
      EndpointRow row;
      row.trial_id = ParseNumber<int>(f[0], "trial_id");
      row.target_id = ParseNumber<int>(f[1], "target_id");
      row.gaze.phi = ParseNumber<double>(f[2], "gaze_phi");
      row.gaze.theta = ParseNumber<double>(f[3], "gaze_theta");
      row.timestamp_ms = ParseNumber<double>(f[4], "timestamp_ms");
      if (f.size() == 6 && !Trim(f[5]).empty()) {
        for (std::string_view id : SplitFields(Trim(f[5]), ';'))
          row.context.push_back(ParseNumber<int>(id, "context id"));
      }
      rows.push_back(std::move(row));
    } catch (const Error& e) {
      throw Error(ErrorCode::kParseError,
                  "endpoint line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<EndpointRow> ReadEndpoints(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open " + path.string());
  return ReadEndpoints(in);
}

void WriteStreamHeader(std::ostream& out, bool tagged) {
  if (tagged) out << "trial_id,target_id,";
  out << "t,gaze_x,gaze_y,gaze_z,head_x,head_y,head_z,fwd_x,fwd_y,fwd_z,"
         "eye_x,eye_y,eye_z\n";
}

void WriteStreamRecord(std::ostream& out, const StreamRecord& r) {
  if (r.trial_id && r.target_id)
    out << *r.trial_id << ',' << *r.target_id << ',';
  out << FormatDouble(r.t);
  for (const Vec3d* v : {&r.gaze_dir, &r.head_pos, &r.head_forward, &r.eye_pos}) {
    for (int i = 0; i < 3; ++i) out << ',' << FormatDouble((*v)(i));
  }
  out << '\n';
}

std::optional<StreamRecord> ParseStreamRecord(std::string_view line) {
  if (IsSkippable(line)) return std::nullopt;
  const auto f = SplitFields(Trim(line), ',');
  if (f.size() != 13 && f.size() != 15)
    throw Error(ErrorCode::kParseError,
                "stream record needs 13 or 15 fields, got " +
                    std::to_string(f.size()));
  StreamRecord r;
  size_t k = 0;
  if (f.size() == 15) {
    r.trial_id = ParseNumber<int>(f[k++], "trial_id");
    r.target_id = ParseNumber<int>(f[k++], "target_id");
  }
  r.t = ParseNumber<double>(f[k++], "t");
  for (Vec3d* v : {&r.gaze_dir, &r.head_pos, &r.head_forward, &r.eye_pos}) {
    for (int i = 0; i < 3; ++i) (*v)(i) = ParseNumber<double>(f[k++], "coordinate");
  }
  if (!(r.gaze_dir.squaredNorm() > 0.0) || !(r.head_forward.squaredNorm() > 0.0))
    throw Error(ErrorCode::kParseError, "direction vector has zero length");
  return r;
}

GazeSample ToGazeSample(const StreamRecord& r) {
  GazeSample s;
  s.t = r.t;
  s.gaze_dir = r.gaze_dir;
  s.head_pos = r.head_pos;
  s.head_forward = r.head_forward;
  s.eye_pos = r.eye_pos;
  return s;
}

StreamRecord ToStreamRecord(const GazeSample& s) {
  StreamRecord r;
  r.t = s.t;
  r.gaze_dir = s.gaze_dir;
  r.head_pos = s.head_pos;
  r.head_forward = s.head_forward;
  r.eye_pos = s.eye_pos;
  return r;
}

json PredictionToJson(const Prediction& p) {
  json votes = json::object();
  for (const auto& [id, v] : p.votes) votes[std::to_string(id)] = v;
  json scores = json::object();
  for (const auto& [id, s] : p.scores) scores[std::to_string(id)] = s;
  return {{"winner", p.winner ? json(*p.winner) : json(nullptr)},
          {"stable", p.stable},
          {"votes", votes},
          {"scores", scores},
          {"candidates", p.candidates},
          {"predicted_gaze",
           {{"phi", p.predicted_gaze.phi}, {"theta", p.predicted_gaze.theta}}}};
}

void WriteTrialLog(const std::vector<TrialRecord>& trials,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream tf(dir / kTrialsFile);
  std::ofstream sf(dir / kStreamsFile);
  if (!tf || !sf)
    throw Error(ErrorCode::kIo, "cannot write trial log in " + dir.string());
  tf << "trial_id,target_id,profile,start_t,confirm_t,endpoint_phi,"
        "endpoint_theta\n";
  WriteStreamHeader(sf, true);
  for (const TrialRecord& t : trials) {
    tf << t.trial_id << ',' << t.target_id << ',' << ProfileKindName(t.profile)
       << ',' << FormatDouble(t.start_t) << ',' << FormatDouble(t.confirm_t)
       << ',' << FormatDouble(t.endpoint.phi) << ','
       << FormatDouble(t.endpoint.theta) << '\n';
    for (const GazeSample& s : t.samples) {
      StreamRecord r = ToStreamRecord(s);
      r.trial_id = t.trial_id;
      r.target_id = t.target_id;
      WriteStreamRecord(sf, r);
    }
  }
}

std::vector<TrialRecord> ReadTrialLog(const std::filesystem::path& dir) {
  std::ifstream tf(dir / kTrialsFile);
  if (!tf)
    throw Error(ErrorCode::kIo, "cannot read " + (dir / kTrialsFile).string());
  std::ifstream sf(dir / kStreamsFile);
  if (!sf)
    throw Error(ErrorCode::kIo, "cannot read " + (dir / kStreamsFile).string());

  std::vector<TrialRecord> trials;
  std::map<int, size_t> index;
  std::string line;
  int line_no = 0;
  while (std::getline(tf, line)) {
    ++line_no;
    if (IsSkippable(line)) continue;
    const auto f = SplitFields(Trim(line), ',');
    if (f.size() != 7)
      throw Error(ErrorCode::kParseError,
                  fmt::format("{}:{}: expected 7 fields", kTrialsFile, line_no));
    TrialRecord t;
    t.trial_id = ParseNumber<int>(f[0], "trial_id");
    t.target_id = ParseNumber<int>(f[1], "target_id");
    const auto kind = ParseProfileKind(Trim(f[2]));
    if (!kind)
      throw Error(ErrorCode::kParseError,
                  fmt::format("{}:{}: unknown profile '{}'", kTrialsFile,
                              line_no, Trim(f[2])));
    t.profile = *kind;
    t.start_t = ParseNumber<double>(f[3], "start_t");
    t.confirm_t = ParseNumber<double>(f[4], "confirm_t");
    t.endpoint = {ParseNumber<double>(f[5], "endpoint_phi"),
                  ParseNumber<double>(f[6], "endpoint_theta")};
    if (!index.emplace(t.trial_id, trials.size()).second)
      throw Error(ErrorCode::kValidationError,
                  fmt::format("duplicate trial id {}", t.trial_id));
    trials.push_back(std::move(t));
  }

  line_no = 0;
  while (std::getline(sf, line)) {
    ++line_no;
    std::optional<StreamRecord> r;
    try {
      r = ParseStreamRecord(line);
    } catch (const Error& e) {
      throw Error(ErrorCode::kParseError,
                  fmt::format("{}:{}: {}", kStreamsFile, line_no, e.what()));
    }
    if (!r) continue;
    if (!r->trial_id)
      throw Error(ErrorCode::kParseError,
                  fmt::format("{}:{}: untagged record", kStreamsFile, line_no));
    const auto it = index.find(*r->trial_id);
    if (it == index.end())
      throw Error(ErrorCode::kValidationError,
                  fmt::format("{}:{}: unknown trial {}", kStreamsFile, line_no,
                              *r->trial_id));
    trials[it->second].samples.push_back(ToGazeSample(*r));
  }
  return trials;
}

}  // namespace casualgaze

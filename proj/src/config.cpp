#include "ernf/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace ernf {

SensorGeometry RunConfig::Sensor::geometry() const {
  SensorGeometry g;
  g.width = width;
  g.height = height;
  g.color_filter = color_filter;
  g.channels = color_filter == ColorFilter::BayerRGGB ? 3 : 1;
  return g;
}

CameraIntrinsics RunConfig::intrinsics() const { return toy_intrinsics(sensor.geometry(), trajectory.radius); }

std::pair<double, double> RunConfig::time_window() const {
  if (scene.source == SourceKind::Toy) return {trajectory.t_start, trajectory.t_start + trajectory.duration};
  return {sensor.t_start, sensor.t_end};
}

void RunConfig::validate() const {
  sensor.geometry().validate();
  ThresholdParams{sensor.c_neg, sensor.c_pos}.validate();
  if (!(sensor.sigma >= 0.0) || !(sensor.tau >= 0.0)) fail(ErrorCode::Config, "sensor sigma and tau must be >= 0");
  const auto [t0, t1] = time_window();
  if (!(t1 > t0)) fail(ErrorCode::Config, "time window is empty");
  if (scene.source == SourceKind::Toy) {
    trajectory.validate();
    if (scene.toy.channels != sensor.geometry().channels)
      fail(ErrorCode::Config, "toy scene channels must match the sensor (3 for rggb)");
  }
  if (!(train.init_ratio > 0.0)) fail(ErrorCode::Config, "init_ratio must be > 0");
  if (train.harmonics < 0 || train.resolution < 2) fail(ErrorCode::Config, "bad model size");
  train.config.validate();
}

namespace {

[[noreturn]] void config_error(const std::string& origin, const YAML::Node& node, const std::string& msg) {
  std::ostringstream os;
  os << origin;
  if (node.Mark().line >= 0) os << ":" << node.Mark().line + 1;
  os << ": " << msg;
  fail(ErrorCode::Config, os.str());
}

class Section {
 public:
  Section(const YAML::Node& node, std::string name, const std::string& origin)
      : node_(node), name_(std::move(name)), origin_(origin) {
    if (node_ && !node_.IsMap()) config_error(origin_, node_, "section '" + name_ + "' must be a mapping");
  }

  void allow(std::initializer_list<const char*> keys) const {
    if (!node_) return;
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      bool ok = false;
      for (const char* k : keys) ok = ok || key == k;
      if (!ok) config_error(origin_, kv.first, "unknown key '" + key + "' in " + name_);
    }
  }

  template <class T>
  void get(const char* key, T& out) const {
    if (!node_ || !node_[key]) return;
    const YAML::Node v = node_[key];
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      config_error(origin_, v, std::string("bad value for ") + name_ + "." + key);
    }
  }

  bool has(const char* key) const { return node_ && node_[key]; }
  YAML::Node node(const char* key) const { return node_ ? node_[key] : YAML::Node(); }

  template <class E>
  void choice(const char* key, E& out, std::initializer_list<std::pair<const char*, E>> options) const {
    if (!has(key)) return;
    std::string s;
    get(key, s);
    for (const auto& [name, value] : options)
      if (s == name) {
        out = value;
        return;
      }
    config_error(origin_, node(key), "unknown " + name_ + "." + key + " '" + s + "'");
  }

 private:
  YAML::Node node_;
  std::string name_;
  const std::string& origin_;
};

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    fail(ErrorCode::Config, origin + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  RunConfig c;
  if (root.IsNull()) return c;
  const Section top(root, "config", origin);
  top.allow({"seed", "threads", "sensor", "scene", "trajectory", "train", "output"});
  top.get("seed", c.seed);
  top.get("threads", c.threads);

  const Section s(top.node("sensor"), "sensor", origin);
  s.allow({"width", "height", "color_filter", "c_neg", "c_pos", "ratio", "sigma", "tau", "t_start", "t_end",
           "max_step"});
  s.get("width", c.sensor.width);
  s.get("height", c.sensor.height);
  s.choice("color_filter", c.sensor.color_filter, {{"none", ColorFilter::None}, {"rggb", ColorFilter::BayerRGGB}});
  s.get("c_neg", c.sensor.c_neg);
  c.sensor.c_pos = c.sensor.c_neg;
  if (s.has("c_pos") && s.has("ratio")) config_error(origin, s.node("ratio"), "give either sensor.c_pos or sensor.ratio");
  s.get("c_pos", c.sensor.c_pos);
  if (s.has("ratio")) {
    double ratio = 1.0;
    s.get("ratio", ratio);
    c.sensor.c_pos = c.sensor.c_neg * ratio;
  }
  s.get("sigma", c.sensor.sigma);
  s.get("tau", c.sensor.tau);
  s.get("t_start", c.sensor.t_start);
  s.get("t_end", c.sensor.t_end);
  s.get("max_step", c.sensor.max_step);

  const Section sc(top.node("scene"), "scene", origin);
  sc.allow({"source", "slope", "offset", "amplitude", "frequency", "terms", "resolution", "channels", "sphere_radius",
            "density", "background", "texture_frequency", "texture_contrast", "samples"});
  sc.choice("source", c.scene.source,
            {{"ramp", SourceKind::Ramp}, {"sinusoid", SourceKind::Sinusoid}, {"random", SourceKind::Random},
             {"toy", SourceKind::Toy}});
  sc.get("slope", c.scene.slope);
  sc.get("offset", c.scene.offset);
  sc.get("amplitude", c.scene.amplitude);
  sc.get("frequency", c.scene.frequency);
  sc.get("terms", c.scene.terms);
  c.scene.toy.channels = c.sensor.geometry().channels;
  sc.get("resolution", c.scene.toy.resolution);
  sc.get("channels", c.scene.toy.channels);
  sc.get("sphere_radius", c.scene.toy.sphere_radius);
  sc.get("density", c.scene.toy.density);
  sc.get("background", c.scene.toy.background);
  sc.get("texture_frequency", c.scene.toy.texture_frequency);
  sc.get("texture_contrast", c.scene.toy.texture_contrast);
  sc.get("samples", c.scene.samples);

  const Section tr(top.node("trajectory"), "trajectory", origin);
  tr.allow({"radius", "height_span", "revolutions", "speed_oscillation", "frequency", "duration", "rate", "t_start"});
  tr.get("radius", c.trajectory.radius);
  tr.get("height_span", c.trajectory.height_span);
  tr.get("revolutions", c.trajectory.revolutions);
  tr.get("speed_oscillation", c.trajectory.speed_oscillation);
  tr.get("frequency", c.trajectory.frequency);
  tr.get("duration", c.trajectory.duration);
  tr.get("rate", c.trajectory.rate);
  tr.get("t_start", c.trajectory.t_start);

  const Section t(top.node("train"), "train", origin);
  t.allow({"model", "iterations", "learning_rate", "decay", "threshold_lr_multiplier", "refractory_range_multiplier",
           "weight_decay", "sample_budget", "lambda_diff", "lambda_grad", "h_rel", "learn_threshold",
           "learn_refractory", "init_ratio", "tau", "loss", "accumulation_window", "harmonics", "resolution",
           "log_every"});
  TrainConfig& tc = c.train.config;
  t.choice("model", c.train.model, {{"signal", ModelKind::Signal}, {"voxel", ModelKind::Voxel}});
  t.get("iterations", tc.iterations);
  t.get("learning_rate", tc.learning_rate);
  t.get("decay", tc.decay);
  t.get("threshold_lr_multiplier", tc.threshold_lr_multiplier);
  t.get("refractory_range_multiplier", tc.refractory_range_multiplier);
  t.get("weight_decay", tc.weight_decay);
  t.get("sample_budget", tc.sample_budget);
  t.get("lambda_diff", tc.weights.lambda_diff);
  t.get("lambda_grad", tc.weights.lambda_grad);
  t.get("h_rel", tc.h_rel);
  t.get("learn_threshold", tc.learn_threshold);
  t.get("learn_refractory", tc.learn_refractory);
  t.get("init_ratio", c.train.init_ratio);
  tc.known_tau = c.sensor.tau;
  t.get("tau", tc.known_tau);
  t.choice("loss", tc.loss, {{"event", TrainLoss::Event}, {"accumulation", TrainLoss::Accumulation}});
  t.get("accumulation_window", tc.accumulation_window);
  t.get("harmonics", c.train.harmonics);
  t.get("resolution", c.train.resolution);
  t.get("log_every", tc.log_every);
  tc.seed = c.seed;
  tc.threads = c.threads;

  const Section o(top.node("output"), "output", origin);
  o.allow({"events", "poses", "checkpoint", "sidecar", "trace"});
  o.get("events", c.output.events);
  o.get("poses", c.output.poses);
  o.get("checkpoint", c.output.checkpoint);
  o.get("sidecar", c.output.sidecar);
  o.get("trace", c.output.trace);

  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

}  // namespace ernf

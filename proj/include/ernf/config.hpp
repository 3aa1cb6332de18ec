#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ernf/core.hpp"
#include "ernf/scenes.hpp"
#include "ernf/trainer.hpp"
#include "ernf/trajectory.hpp"

namespace ernf {

enum class SourceKind { Ramp, Sinusoid, Random, Toy };
enum class ModelKind { Signal, Voxel };

// Units: times in seconds, rates and frequencies in Hz, thresholds and
// log-radiance values in natural-log units, distances in scene units.
struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 0;

  struct Sensor {
    int width = 16;
    int height = 16;
    ColorFilter color_filter = ColorFilter::None;
    double c_neg = 0.25;
    double c_pos = 0.25;
    double sigma = 0.0;  // pixel-to-pixel threshold std-dev
    double tau = 0.0;    // refractory period
    double t_start = 0.0;
    double t_end = 1.0;
    double max_step = 0.0;  // 0 = (t_end - t_start) / 1000
    SensorGeometry geometry() const;
  } sensor;

  struct Scene {
    SourceKind source = SourceKind::Ramp;
    double slope = 1.0;
    double offset = 0.0;
    double amplitude = 1.0;
    double frequency = 1.0;
    int terms = 3;
    ToySceneParams toy;
    int samples = VoxelScene::kDefaultSamples;
  } scene;

  SpiralParams trajectory;

  struct Train {
    ModelKind model = ModelKind::Signal;
    TrainConfig config;
    double init_ratio = 1.0;
    int harmonics = TemporalSignalField::kDefaultHarmonics;
    int resolution = 32;
  } train;

  struct Output {
    std::string events = "events.ernf";
    std::string poses = "poses.txt";
    std::string checkpoint = "model.erck";
    std::string sidecar = "model.erts";
    std::string trace = "trace.txt";
  } output;

  void validate() const;
  // Pinhole intrinsics framing the unit box from the trajectory radius.
  CameraIntrinsics intrinsics() const;
  // Simulation window: the trajectory span for toy scenes, the sensor window otherwise.
  std::pair<double, double> time_window() const;
};

// YAML document with top-level keys seed, threads and the sections sensor,
// scene, trajectory, train, output. Unknown keys and malformed values raise
// ErrorCode::Config with a line number.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::filesystem::path& path);

}  // namespace ernf

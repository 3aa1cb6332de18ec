#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "ernf/core.hpp"
#include "ernf/fields.hpp"
#include "ernf/metrics.hpp"
#include "ernf/trainer.hpp"
#include "ernf/trajectory.hpp"

namespace ernf {

namespace fs = std::filesystem;

using Bytes = std::vector<std::uint8_t>;

// Event file v1: "ERNF", version 1, then (all little-endian)
//   u16 width, u16 height, u8 channels, u8 reserved,
//   i64 t_start_ns, i64 t_end_ns, u64 count,
//   count x { u16 x, u16 y, i8 polarity, u8 reserved, u16 padding, i64 t_curr_ns }.
// Records are sorted by (t_curr, y, x). t_prev is rebuilt on load. Three
// channels mean an RGGB mosaic.
inline constexpr std::uint8_t kEventFileVersion = 1;
inline constexpr std::size_t kEventHeaderBytes = 4 + 1 + 2 + 2 + 1 + 1 + 8 + 8 + 8;
inline constexpr std::size_t kEventRecordBytes = 16;

// Seconds to integer nanoseconds, ties to even.
std::int64_t to_ns(double seconds);
double from_ns(std::int64_t ns);

Bytes encode_events(const EventStream& stream);
EventStream decode_events(const Bytes& bytes);
void write_event_file(const fs::path& path, const EventStream& stream);
EventStream read_event_file(const fs::path& path);

// Text pose file: one "t px py pz qw qx qy qz" row per sample, '#' comments.
void write_pose_file(const fs::path& path, const Trajectory& trajectory);
Trajectory read_pose_file(const fs::path& path);

// Float map: text line "width height channels\n" then f32 little-endian data.
void write_image(const fs::path& path, const Image& image);
Image read_image(const fs::path& path);
// 8-bit PGM/PPM for viewing: clamp(v / scale, 0, 1)^(1/2.2).
void export_image_8bit(const fs::path& path, const Image& image, double scale = 1.0);

// Field checkpoint: "ERCK", u8 version, u8 kind, kind-specific header, u64
// parameter count, f32 parameters.
struct VoxelCheckpoint {
  VoxelField field;
};
struct SignalCheckpoint {
  SensorGeometry geometry;
  int harmonics = 0;
  double t0 = 0.0, period = 1.0;
  std::vector<double> params;
};
using Checkpoint = std::variant<VoxelCheckpoint, SignalCheckpoint>;

void write_checkpoint(const fs::path& path, const VoxelField& field);
void write_checkpoint(const fs::path& path, const TemporalSignalField& field);
Checkpoint read_checkpoint(const fs::path& path);
TemporalSignalField to_signal_field(const SignalCheckpoint& ck);

// Trainer sidecar: "ERTS", u8 version, intrinsics, iteration and Adam moments.
void write_train_sidecar(const fs::path& path, const TrainState& state);
TrainState read_train_sidecar(const fs::path& path);

// Loss trace: "iteration loss ratio tau" text rows.
void write_loss_trace(const fs::path& path, const std::vector<TraceEntry>& trace);

}  // namespace ernf

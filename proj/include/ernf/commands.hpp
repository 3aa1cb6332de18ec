#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include "ernf/config.hpp"
#include "ernf/core.hpp"
#include "ernf/fields.hpp"
#include "ernf/metrics.hpp"
#include "ernf/trainer.hpp"

namespace ernf {

namespace fs = std::filesystem;

// Ground-truth voxel scene of a toy config (field, spiral, intrinsics, sensor).
VoxelScene make_ground_truth_scene(const RunConfig& config);

struct SimulationOutput {
  EventStream stream;
  Trajectory trajectory;
  StreamStats stats;
};

// In-memory simulation of the configured source.
SimulationOutput run_simulation(const RunConfig& config);

// Simulates, writes the event and pose files, prints the stream statistics.
SimulationOutput cmd_simulate(const RunConfig& config, std::ostream& out);

// Initial model for reconstructing `stream` under `config`; voxel models need the poses.
std::unique_ptr<LogRadianceModel> make_initial_model(const RunConfig& config, const EventStream& stream,
                                                     const Trajectory* poses);

// Trains on the event file and writes checkpoint, sidecar and loss trace.
TrainState cmd_reconstruct(const RunConfig& config, const fs::path& events, const std::optional<fs::path>& poses,
                           std::ostream& out);

struct ViewScore {
  double psnr = 0.0;
  double ssim = 0.0;
};
struct EvaluationReport {
  std::vector<ViewScore> views;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::vector<double> a, b;  // gamma fit per channel
};

// Gamma-corrects predictions against references, then scores each view. PSNR
// uses the reference peak, SSIM sees both images divided by that peak.
EvaluationReport evaluate_views(const std::vector<Image>& predicted, const std::vector<Image>& references);

// Renders a voxel field at every pose of `views`.
std::vector<Image> render_views(const VoxelField& field, const Trajectory& views, const RunConfig& config);

// Renders the ground truth (or a voxel checkpoint) at `n_views` held-out poses
// into `dir`: poses.txt, view_NNN.flt and view_NNN.pgm/ppm.
void cmd_render(const RunConfig& config, const std::optional<fs::path>& checkpoint, int n_views, const fs::path& dir,
                std::ostream& out);

// Renders a voxel checkpoint at the poses in `dir` and scores it against the
// stored views. Prints an aligned table and machine-readable "view" rows.
EvaluationReport cmd_evaluate(const RunConfig& config, const fs::path& checkpoint, const fs::path& dir,
                              std::ostream& out);

void print_report(const EvaluationReport& report, std::ostream& out);

// tau as a percentage of the stream's duration.
double duration_percent(const EventStream& stream, double tau);

// Statistics of an event file, optionally against a reference file; `tau`
// is reported as a percentage of the sequence duration.
StreamStats cmd_stats(const fs::path& events, const std::optional<fs::path>& reference, std::optional<double> tau,
                      std::ostream& out);

}  // namespace ernf

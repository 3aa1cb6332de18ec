#include "ernf/commands.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>

#include "ernf/io.hpp"
#include "ernf/scenes.hpp"
#include "ernf/simulator.hpp"

namespace ernf {

VoxelScene make_ground_truth_scene(const RunConfig& c) {
  return VoxelScene(make_toy_field(c.scene.toy), generate_spiral(c.trajectory), c.intrinsics(), c.sensor.geometry(),
                    c.scene.samples);
}

namespace {

SimulationParams simulation_params(const RunConfig& c) {
  SimulationParams p;
  p.thresholds = {c.sensor.c_neg, c.sensor.c_pos};
  p.sigma = c.sensor.sigma;
  p.tau = c.sensor.tau;
  std::tie(p.t0, p.t1) = c.time_window();
  p.seed = c.seed;
  p.max_step = c.sensor.max_step;
  p.threads = c.threads;
  return p;
}

void print_stats(const StreamStats& s, std::ostream& out) {
  out << "events            " << s.event_count << '\n'
      << "mean interval     " << s.mean_interval << " s\n"
      << "equivalent views  " << s.equivalent_views << '\n';
  if (s.sparsity) out << "sparsity          " << *s.sparsity << '\n';
}

}  // namespace

SimulationOutput run_simulation(const RunConfig& c) {
  c.validate();
  const SensorGeometry g = c.sensor.geometry();
  const SimulationParams p = simulation_params(c);
  SimulationOutput r;
  switch (c.scene.source) {
    case SourceKind::Toy: {
      const VoxelScene scene = make_ground_truth_scene(c);
      r.stream = simulate(ModelSource(scene, g.channels), g, p);
      r.trajectory = scene.trajectory();
      break;
    }
    case SourceKind::Ramp:
      r.stream = simulate(ramp_source(c.scene.slope, c.scene.offset), g, p);
      break;
    case SourceKind::Sinusoid:
      r.stream = simulate(sinusoid_source(g, c.scene.amplitude, c.scene.frequency, c.scene.offset), g, p);
      break;
    case SourceKind::Random:
      r.stream = simulate(random_smooth_source(c.seed, c.scene.terms, c.scene.amplitude, c.scene.frequency), g, p);
      break;
  }
  // Analytic sources have no camera; record a static pose over the window.
  if (c.scene.source != SourceKind::Toy) r.trajectory = constant_trajectory(PoseSample{}, p.t0, p.t1, 1.0);
  r.stats = stream_stats(r.stream);
  return r;
}

SimulationOutput cmd_simulate(const RunConfig& c, std::ostream& out) {
  SimulationOutput r = run_simulation(c);
  write_event_file(c.output.events, r.stream);
  write_pose_file(c.output.poses, r.trajectory);
  out << "wrote " << c.output.events << " and " << c.output.poses << '\n';
  print_stats(r.stats, out);
  return r;
}

std::unique_ptr<LogRadianceModel> make_initial_model(const RunConfig& c, const EventStream& stream,
                                                     const Trajectory* poses) {
  if (c.train.model == ModelKind::Signal)
    return std::make_unique<TemporalSignalField>(stream.geometry, c.train.harmonics, stream.t_start,
                                                 stream.t_end - stream.t_start);
  if (!poses) fail(ErrorCode::InvalidArgument, "voxel reconstruction needs a pose file");
  if (stream.geometry.width != c.sensor.width || stream.geometry.height != c.sensor.height)
    fail(ErrorCode::GeometryMismatch, "event file sensor differs from the configured sensor");
  return std::make_unique<VoxelScene>(make_initial_field(c.train.resolution, Aabb{}, stream.geometry.channels),
                                      *poses, c.intrinsics(), stream.geometry, c.scene.samples);
}

TrainState cmd_reconstruct(const RunConfig& c, const fs::path& events, const std::optional<fs::path>& poses,
                           std::ostream& out) {
  const EventStream stream = read_event_file(events);
  std::optional<Trajectory> trajectory;
  if (c.train.model == ModelKind::Voxel) trajectory = read_pose_file(poses.value_or(fs::path(c.output.poses)));
  auto model = make_initial_model(c, stream, trajectory ? &*trajectory : nullptr);

  const TrainConfig& tc = c.train.config;
  const double tau_max = tc.learn_refractory ? tau_max_from_stream(stream) : 0.0;
  const LearnableIntrinsics init = LearnableIntrinsics::make(c.sensor.c_neg, c.train.init_ratio, tau_max, 0.5 * tau_max);
  const TrainState st = fit(stream, *model, tc, init, [&](const TraceEntry& e) {
    out << "iter " << e.iteration << " loss " << e.loss << " ratio " << e.ratio << " tau " << e.tau << '\n';
  });

  if (auto* sig = dynamic_cast<TemporalSignalField*>(model.get()))
    write_checkpoint(c.output.checkpoint, *sig);
  else
    write_checkpoint(c.output.checkpoint, static_cast<VoxelScene&>(*model).field());
  write_train_sidecar(c.output.sidecar, st);
  write_loss_trace(c.output.trace, st.trace);
  out << "wrote " << c.output.checkpoint << ", " << c.output.sidecar << " and " << c.output.trace << '\n';
  if (!st.trace.empty())
    out << "final loss " << st.trace.back().loss << " ratio " << st.intrinsics.ratio() << '\n';
  return st;
}

EvaluationReport evaluate_views(const std::vector<Image>& predicted, const std::vector<Image>& references) {
  if (predicted.size() != references.size() || predicted.empty())
    fail(ErrorCode::ShapeMismatch, "prediction and reference view counts differ");
  std::vector<ViewPair> pairs;
  for (std::size_t i = 0; i < predicted.size(); ++i) pairs.push_back({predicted[i], references[i]});
  const GammaFit fit = gamma_correct(pairs);
  EvaluationReport r;
  r.a = fit.a;
  r.b = fit.b;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Image& ref = references[i];
    const double peak = ref.max();
    Image x = fit.corrected[i], y = ref;
    for (double& v : x.data) v /= peak;
    for (double& v : y.data) v /= peak;
    r.views.push_back({psnr(fit.corrected[i], ref, peak), ssim(x, y)});
    r.mean_psnr += r.views.back().psnr;
    r.mean_ssim += r.views.back().ssim;
  }
  r.mean_psnr /= static_cast<double>(r.views.size());
  r.mean_ssim /= static_cast<double>(r.views.size());
  return r;
}

std::vector<Image> render_views(const VoxelField& field, const Trajectory& views, const RunConfig& c) {
  std::vector<Image> out;
  for (const PoseSample& p : views.samples())
    out.push_back(render_view(field, p, c.intrinsics(), c.sensor.width, c.sensor.height, c.scene.samples, c.threads));
  return out;
}

namespace {

VoxelField load_voxel_checkpoint(const fs::path& path) {
  Checkpoint ck = read_checkpoint(path);
  auto* v = std::get_if<VoxelCheckpoint>(&ck);
  if (!v) fail(ErrorCode::InvalidArgument, "checkpoint does not hold a voxel field");
  return std::move(v->field);
}

std::string view_name(std::size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%03zu%s", i, ext);
  return buf;
}

}  // namespace

void cmd_render(const RunConfig& c, const std::optional<fs::path>& checkpoint, int n_views, const fs::path& dir,
                std::ostream& out) {
  const VoxelField field = checkpoint ? load_voxel_checkpoint(*checkpoint) : make_toy_field(c.scene.toy);
  const Trajectory views = evaluation_views(c.trajectory, n_views);
  fs::create_directories(dir);
  write_pose_file(dir / "poses.txt", views);
  const auto images = render_views(field, views, c);
  for (std::size_t i = 0; i < images.size(); ++i) {
    write_image(dir / view_name(i, ".flt"), images[i]);
    export_image_8bit(dir / view_name(i, images[i].channels == 1 ? ".pgm" : ".ppm"), images[i], images[i].max());
  }
  out << "rendered " << images.size() << " views into " << dir.string() << '\n';
}

void print_report(const EvaluationReport& r, std::ostream& out) {
  out << std::fixed << std::setprecision(4);
  out << "view      psnr_db     ssim\n";
  for (std::size_t i = 0; i < r.views.size(); ++i)
    out << std::setw(4) << i << "  " << std::setw(11) << r.views[i].psnr << "  " << std::setw(7) << r.views[i].ssim
        << '\n';
  out << "mean  " << std::setw(11) << r.mean_psnr << "  " << std::setw(7) << r.mean_ssim << '\n';
  out << std::defaultfloat << std::setprecision(17);
  for (std::size_t i = 0; i < r.views.size(); ++i)
    out << "view," << i << ',' << r.views[i].psnr << ',' << r.views[i].ssim << '\n';
  out << "mean," << r.mean_psnr << ',' << r.mean_ssim << '\n';
  out << std::setprecision(6);
}

EvaluationReport cmd_evaluate(const RunConfig& c, const fs::path& checkpoint, const fs::path& dir, std::ostream& out) {
  const VoxelField field = load_voxel_checkpoint(checkpoint);
  const Trajectory views = read_pose_file(dir / "poses.txt");
  std::vector<Image> refs;
  for (std::size_t i = 0; fs::exists(dir / view_name(i, ".flt")); ++i) refs.push_back(read_image(dir / view_name(i, ".flt")));
  if (refs.size() != views.size()) fail(ErrorCode::ShapeMismatch, "reference image count differs from pose count");
  // Predictions share the f32 storage precision of the stored references.
  std::vector<Image> predicted = render_views(field, views, c);
  for (Image& im : predicted)
    for (double& v : im.data) v = static_cast<float>(v);
  const EvaluationReport r = evaluate_views(predicted, refs);
  print_report(r, out);
  return r;
}

double duration_percent(const EventStream& stream, double tau) {
  const double span = stream.t_end - stream.t_start;
  if (!(span > 0.0)) fail(ErrorCode::InvalidArgument, "stream has an empty time span");
  return 100.0 * tau / span;
}

StreamStats cmd_stats(const fs::path& events, const std::optional<fs::path>& reference, std::optional<double> tau,
                      std::ostream& out) {
  const EventStream s = read_event_file(events);
  std::optional<EventStream> ref;
  if (reference) ref = read_event_file(*reference);
  const StreamStats st = stream_stats(s, ref ? &*ref : nullptr);
  print_stats(st, out);
  if (tau) out << "% seq. duration   " << duration_percent(s, *tau) << '\n';
  return st;
}

}  // namespace ernf

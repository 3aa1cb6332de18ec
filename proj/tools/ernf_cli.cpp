// Command-line front end: simulate, reconstruct, render, evaluate, stats.
// Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ernf/commands.hpp"
#include "ernf/config.hpp"

namespace {

int exit_code_for(ernf::ErrorCode code) {
  switch (code) {
    case ernf::ErrorCode::NonFiniteRadiance:
    case ernf::ErrorCode::DivergedLoss:
    case ernf::ErrorCode::RankDeficient:
      return 3;
    default:
      return 2;
  }
}

template <class T>
std::optional<T> opt(const CLI::Option* o, const T& value) {
  return o->count() ? std::optional<T>(value) : std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-camera radiance field toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  int threads = -1;
  auto add_config = [&](CLI::App* sub, bool required) {
    auto* o = sub->add_option("-c,--config", config_path, "YAML run configuration");
    if (required) o->required();
    sub->add_option("-j,--threads", threads, "worker threads (0 = all cores)");
  };

  auto* simulate = app.add_subcommand("simulate", "simulate an event stream and its poses");
  add_config(simulate, true);

  std::string events_path, poses_path;
  auto* reconstruct = app.add_subcommand("reconstruct", "fit a model to an event file");
  add_config(reconstruct, true);
  reconstruct->add_option("events", events_path, "event file")->required()->check(CLI::ExistingFile);
  auto* poses_opt = reconstruct->add_option("--poses", poses_path, "pose file (voxel models)");

  std::string checkpoint_path, dir;
  int views = 8;
  auto* render = app.add_subcommand("render", "render held-out reference views");
  add_config(render, true);
  auto* render_ck = render->add_option("--checkpoint", checkpoint_path, "render this voxel checkpoint instead of the ground truth");
  render->add_option("--views", views, "number of views")->check(CLI::PositiveNumber);
  render->add_option("--out", dir, "output directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint against reference views");
  add_config(evaluate, true);
  evaluate->add_option("checkpoint", checkpoint_path, "voxel checkpoint")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--reference", dir, "directory written by 'render'")->required()->check(CLI::ExistingDirectory);

  std::string reference_path;
  double tau = 0.0;
  auto* stats = app.add_subcommand("stats", "event stream statistics");
  stats->add_option("events", events_path, "event file")->required()->check(CLI::ExistingFile);
  auto* ref_opt = stats->add_option("--reference", reference_path, "event file of the same scene at tau = 0");
  auto* tau_opt = stats->add_option("--tau", tau, "refractory period to express as % of the duration (s)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    auto config = [&] {
      ernf::RunConfig c = ernf::load_config(config_path);
      if (threads >= 0) c.threads = c.train.config.threads = threads;
      return c;
    };
    if (*simulate) {
      ernf::cmd_simulate(config(), std::cout);
    } else if (*reconstruct) {
      ernf::cmd_reconstruct(config(), events_path, opt<std::filesystem::path>(poses_opt, poses_path), std::cout);
    } else if (*render) {
      ernf::cmd_render(config(), opt<std::filesystem::path>(render_ck, checkpoint_path), views, dir, std::cout);
    } else if (*evaluate) {
      ernf::cmd_evaluate(config(), checkpoint_path, dir, std::cout);
    } else if (*stats) {
      ernf::cmd_stats(events_path, opt<std::filesystem::path>(ref_opt, reference_path), opt(tau_opt, tau), std::cout);
    }
  } catch (const ernf::Error& e) {
    std::cerr << "error [" << ernf::to_string(e.code()) << "]: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <sys/wait.h>

#include "ernf/commands.hpp"
#include "ernf/config.hpp"
#include "ernf/io.hpp"
#include "ernf/simulator.hpp"
#include "support.hpp"

using namespace ernf;
using ernf::test::Gen;
using ernf::test::TempDir;

namespace {

Bytes slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void spit(const fs::path& p, const Bytes& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

void spit_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

// Stream whose timestamps are whole nanoseconds, so a round-trip is exact.
EventStream ns_stream(Gen& g, const SensorGeometry& geo) {
  EventStream s = test::random_stream(g, geo, 0.0, 1.0, 6);
  for (Event& e : s.events) e.t_curr = from_ns(to_ns(e.t_curr));
  std::vector<double> last(geo.pixel_count(), 0.0);
  EventStream out;
  out.geometry = geo;
  out.t_start = 0.0;
  out.t_end = 1.0;
  for (Event e : s.events) {
    double& prev = last[geo.index(e.u)];
    if (!(e.t_curr > prev)) continue;
    e.t_prev = prev;
    prev = e.t_curr;
    out.events.push_back(e);
  }
  sort_canonical(out);
  return out;
}

std::string ramp_yaml(const TempDir& d, int threads = 0, double sigma = 0.0) {
  std::ostringstream y;
  y << "seed: 3\nthreads: " << threads << "\n"
    << "sensor:\n  width: 2\n  height: 2\n  c_neg: 0.25\n  sigma: " << sigma << "\n  tau: 0\n"
    << "scene:\n  source: ramp\n  slope: 1\n"
    << "output:\n  events: " << (d / "ev.ernf").string() << "\n  poses: " << (d / "poses.txt").string()
    << "\n  checkpoint: " << (d / "model.erck").string() << "\n  sidecar: " << (d / "model.erts").string()
    << "\n  trace: " << (d / "trace.txt").string() << "\n";
  return y.str();
}

std::string toy_yaml(const TempDir& d, int threads = 0) {
  std::ostringstream y;
  y << "seed: 4\nthreads: " << threads << "\n"
    << "sensor:\n  width: 12\n  height: 12\n  c_neg: 0.25\n  sigma: 0.03\n"
    << "scene:\n  source: toy\n  resolution: 8\n  samples: 16\n"
    << "trajectory:\n  duration: 0.5\n  revolutions: 0.5\n  rate: 100\n"
    << "train:\n  model: voxel\n  resolution: 4\n  iterations: 3\n  sample_budget: 2048\n"
    << "output:\n  events: " << (d / "ev.ernf").string() << "\n  poses: " << (d / "poses.txt").string()
    << "\n  checkpoint: " << (d / "model.erck").string() << "\n  sidecar: " << (d / "model.erts").string()
    << "\n  trace: " << (d / "trace.txt").string() << "\n";
  return y.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(ERNF_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_SUITE("cli_io") {
  TEST_CASE("nanosecond conversion rounds half to even") {
    CHECK(to_ns(1.0) == 1000000000);
    CHECK(to_ns(0.5e-9) == 0);
    CHECK(to_ns(1.5e-9) == 2);
    CHECK(to_ns(2.5e-9) == 2);
    CHECK(to_ns(-1.5e-9) == -2);
    CHECK(from_ns(to_ns(0.123456789)) == 0.123456789);
    CHECK_THROWS_AS(to_ns(std::numeric_limits<double>::infinity()), Error);
  }

  TEST_CASE("property: nanosecond-aligned streams round-trip exactly") {
    Gen g(1);
    for (int trial = 0; trial < 20; ++trial) {
      SensorGeometry geo = test::mono(g.integer(1, 9), g.integer(1, 9));
      if (trial % 3 == 0) {
        geo.color_filter = ColorFilter::BayerRGGB;
        geo.channels = 3;
      }
      const EventStream s = ns_stream(g, geo);
      const EventStream d = decode_events(encode_events(s));
      CHECK(d.geometry.width == geo.width);
      CHECK(d.geometry.channels == geo.channels);
      CHECK(d.t_start == s.t_start);
      CHECK(d.t_end == s.t_end);
      REQUIRE(d.size() == s.size());
      for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(d.events[i].u == s.events[i].u);
        CHECK(d.events[i].p == s.events[i].p);
        CHECK(d.events[i].t_prev == s.events[i].t_prev);
        CHECK(d.events[i].t_curr == s.events[i].t_curr);
      }
    }
  }

  TEST_CASE("property: arbitrary timestamps move by at most half a nanosecond and re-encoding is idempotent") {
    Gen g(2);
    for (int trial = 0; trial < 20; ++trial) {
      const EventStream s = test::random_stream(g, test::mono(5, 4), 0.0, 2.0, 8);
      const Bytes once = encode_events(s);
      const EventStream d = decode_events(once);
      REQUIRE(d.size() == s.size());
      for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(d.events[i].t_curr - s.events[i].t_curr) <= 0.5e-9 + 1e-15);
      CHECK(encode_events(d) == once);
      CHECK(validate_stream(d).ok());
    }
  }

  TEST_CASE("event file header layout") {
    EventStream s;
    s.geometry = test::mono(3, 2);
    s.t_end = 1.0;
    s.events = {{{2, 1}, Polarity::Negative, 0.0, 0.5}};
    const Bytes b = encode_events(s);
    REQUIRE(b.size() == kEventHeaderBytes + kEventRecordBytes);
    CHECK(std::string(b.begin(), b.begin() + 4) == "ERNF");
    CHECK(b[4] == 1);
    CHECK(b[5] == 3);
    CHECK(b[7] == 2);
    const std::size_t r = kEventHeaderBytes;
    CHECK(b[r] == 2);
    CHECK(b[r + 2] == 1);
    CHECK(static_cast<std::int8_t>(b[r + 4]) == -1);
  }

  TEST_CASE("corrupt event files") {
    Gen g(3);
    const Bytes good = encode_events(ns_stream(g, test::mono(4, 4)));
    REQUIRE(good.size() > kEventHeaderBytes + 2 * kEventRecordBytes);
    Bytes b = good;
    b[0] = 'X';
    CHECK(code_of([&] { decode_events(b); }) == ErrorCode::BadMagic);
    b = good;
    b[4] = 7;
    CHECK(code_of([&] { decode_events(b); }) == ErrorCode::CorruptFile);
    b = Bytes(good.begin(), good.end() - 3);
    CHECK(code_of([&] { decode_events(b); }) == ErrorCode::CorruptFile);
    b = good;
    b[kEventHeaderBytes + 4] = 0;  // polarity
    CHECK(code_of([&] { decode_events(b); }) == ErrorCode::CorruptFile);
    b = good;
    b[kEventHeaderBytes] = 200;  // x outside the sensor
    CHECK(code_of([&] { decode_events(b); }) == ErrorCode::CorruptFile);
    b = good;
    // Swap the first two records: order broken.
    std::swap_ranges(b.begin() + kEventHeaderBytes, b.begin() + kEventHeaderBytes + kEventRecordBytes,
                     b.begin() + kEventHeaderBytes + kEventRecordBytes);
    if (b != good) CHECK(code_of([&] { decode_events(b); }) == ErrorCode::CorruptFile);
    CHECK(code_of([] { read_event_file("/nonexistent/file.ernf"); }) == ErrorCode::Io);
  }

  TEST_CASE("pose file round-trip") {
    TempDir d("pose");
    const Trajectory t = test::orbit(0.0, 1.0, 50.0);
    write_pose_file(d / "p.txt", t);
    const Trajectory r = read_pose_file(d / "p.txt");
    REQUIRE(r.size() == t.size());
    CHECK(r.rate() == doctest::Approx(t.rate()).epsilon(1e-12));
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(r.samples()[i].position == t.samples()[i].position);
      // Loading re-normalises, which may move the last bit.
      CHECK((r.samples()[i].orientation.coeffs() - t.samples()[i].orientation.coeffs()).norm() < 1e-15);
    }
    spit_text(d / "bad.txt", "# header\n0 1 2 3 1 0 0\n");
    CHECK(code_of([&] { read_pose_file(d / "bad.txt"); }) == ErrorCode::CorruptFile);
  }

  TEST_CASE("image round-trip stores single precision") {
    TempDir d("img");
    Gen g(4);
    Image im(5, 3, 3);
    for (double& v : im.data) v = g.uniform(0.0, 10.0);
    write_image(d / "a.flt", im);
    const Image r = read_image(d / "a.flt");
    REQUIRE(r.same_shape(im));
    for (std::size_t i = 0; i < im.size(); ++i) CHECK(r.data[i] == static_cast<double>(static_cast<float>(im.data[i])));
    Bytes b = slurp(d / "a.flt");
    b.pop_back();
    spit(d / "b.flt", b);
    CHECK(code_of([&] { read_image(d / "b.flt"); }) == ErrorCode::CorruptFile);
    export_image_8bit(d / "a.ppm", im, im.max());
    CHECK(fs::file_size(d / "a.ppm") > 5u * 3u * 3u);
  }

  TEST_CASE("checkpoint round-trips") {
    TempDir d("ck");
    Gen g(5);
    const VoxelField v = test::random_voxel_field(g, 5, 3);
    write_checkpoint(d / "v.erck", v);
    const Checkpoint cv = read_checkpoint(d / "v.erck");
    const auto* vv = std::get_if<VoxelCheckpoint>(&cv);
    REQUIRE(vv);
    CHECK(vv->field.resolution() == 5);
    CHECK(vv->field.channels() == 3);
    for (std::size_t i = 0; i < v.params().size(); ++i)
      CHECK(vv->field.params()[i] == static_cast<double>(static_cast<float>(v.params()[i])));

    const TemporalSignalField s = test::random_signal_field(g, test::mono(3, 2), 4, 0.5, 2.0);
    write_checkpoint(d / "s.erck", s);
    const Checkpoint cs = read_checkpoint(d / "s.erck");
    const auto* ss = std::get_if<SignalCheckpoint>(&cs);
    REQUIRE(ss);
    const TemporalSignalField back = to_signal_field(*ss);
    CHECK(back.harmonics() == 4);
    CHECK(back.t0() == 0.5);
    CHECK(back.period() == 2.0);
    for (std::size_t i = 0; i < s.params().size(); ++i)
      CHECK(back.params()[i] == static_cast<double>(static_cast<float>(s.params()[i])));

    Bytes b = slurp(d / "s.erck");
    b[0] = 'Q';
    spit(d / "x.erck", b);
    CHECK(code_of([&] { read_checkpoint(d / "x.erck"); }) == ErrorCode::BadMagic);
  }

  TEST_CASE("trainer sidecar round-trip") {
    TempDir d("side");
    TrainState st;
    st.intrinsics = LearnableIntrinsics::make(0.2, 1.7, 0.04, 0.01);
    st.iteration = 123;
    st.field_moments = {{0.1, -0.2, 0.3}, {1e-3, 2e-3, 3e-3}};
    st.intrinsic_moments = {{0.5, 0.25}, {0.125, 1.0 / 3.0}};
    write_train_sidecar(d / "t.erts", st);
    const TrainState r = read_train_sidecar(d / "t.erts");
    CHECK(r.iteration == 123);
    CHECK(r.intrinsics.c_neg == st.intrinsics.c_neg);
    CHECK(r.intrinsics.ratio_raw == st.intrinsics.ratio_raw);
    CHECK(r.intrinsics.tau_raw == st.intrinsics.tau_raw);
    CHECK(r.intrinsics.tau_max == st.intrinsics.tau_max);
    CHECK(r.field_moments.m == st.field_moments.m);
    CHECK(r.field_moments.v == st.field_moments.v);
    CHECK(r.intrinsic_moments.v == st.intrinsic_moments.v);
  }

  TEST_CASE("config parsing") {
    const RunConfig c = parse_config(
        "seed: 7\nsensor:\n  width: 8\n  height: 4\n  color_filter: rggb\n  c_neg: 0.2\n  ratio: 2\n  tau: 0.01\n"
        "train:\n  iterations: 10\n  loss: accumulation\n");
    CHECK(c.seed == 7);
    CHECK(c.sensor.geometry().channels == 3);
    CHECK(c.sensor.c_pos == doctest::Approx(0.4));
    CHECK(c.train.config.known_tau == 0.01);
    CHECK(c.train.config.loss == TrainLoss::Accumulation);
    CHECK(c.train.config.seed == 7);

    try {
      parse_config("sensor:\n  width: 4\n  bogus: 1\n", "run.yaml");
      FAIL("expected Config");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Config);
      CHECK(std::string(e.what()).find("run.yaml:3") != std::string::npos);
    }
    CHECK(code_of([] { parse_config("frobnicate: 1\n"); }) == ErrorCode::Config);
    CHECK(code_of([] { parse_config("sensor:\n  width: many\n"); }) == ErrorCode::Config);
    CHECK(code_of([] { parse_config("sensor:\n  c_pos: 0.3\n  ratio: 2\n"); }) == ErrorCode::Config);
    CHECK(code_of([] { parse_config("scene:\n  source: teapot\n"); }) == ErrorCode::Config);
    CHECK(code_of([] { parse_config("sensor: [1, 2]\n"); }) == ErrorCode::Config);
    CHECK(code_of([] { load_config("/nonexistent.yaml"); }) == ErrorCode::Io);
  }

  TEST_CASE("simulate: ramp config reproduces the simulator's ramp events") {
    TempDir d("sim");
    std::ostringstream log;
    cmd_simulate(parse_config(ramp_yaml(d)), log);
    const EventStream s = read_event_file(d / "ev.ernf");
    CHECK(s.size() == 16);
    const double want[] = {0.25, 0.5, 0.75, 1.0};
    for (const Event& e : s.events) {
      const double t = e.t_curr;
      bool hit = false;
      for (double w : want) hit = hit || std::abs(t - w) < 1e-8;
      CHECK(hit);
      CHECK(e.p == Polarity::Positive);
    }
    CHECK(encode_events(s) == slurp(d / "ev.ernf"));
    CHECK(log.str().find("events") != std::string::npos);
    CHECK(fs::exists(d / "poses.txt"));
  }

  TEST_CASE("simulate is deterministic across runs and thread counts") {
    TempDir a("det_a"), b("det_b"), c("det_c");
    std::ostringstream log;
    cmd_simulate(parse_config(ramp_yaml(a, 1, 0.03)), log);
    cmd_simulate(parse_config(ramp_yaml(b, 1, 0.03)), log);
    cmd_simulate(parse_config(ramp_yaml(c, 4, 0.03)), log);
    CHECK(slurp(a / "ev.ernf") == slurp(b / "ev.ernf"));
    CHECK(slurp(a / "ev.ernf") == slurp(c / "ev.ernf"));
  }

  TEST_CASE("reconstruct: zero iterations writes the initialisation") {
    TempDir d("rec0");
    std::ostringstream log;
    const std::string y = ramp_yaml(d) + "train:\n  iterations: 0\n  harmonics: 3\n";
    const RunConfig c = parse_config(y);
    cmd_simulate(c, log);
    cmd_reconstruct(c, d / "ev.ernf", std::nullopt, log);
    const EventStream s = read_event_file(d / "ev.ernf");
    const auto init = make_initial_model(c, s, nullptr);
    const Checkpoint ck = read_checkpoint(d / "model.erck");
    const auto& sig = std::get<SignalCheckpoint>(ck);
    REQUIRE(sig.params.size() == init->params().size());
    for (std::size_t i = 0; i < sig.params.size(); ++i)
      CHECK(sig.params[i] == static_cast<double>(static_cast<float>(init->params()[i])));
  }

  TEST_CASE("reconstruct: sinusoid pipeline drives the loss below 1% of its start") {
    TempDir d("rec");
    std::ostringstream log;
    std::string y = ramp_yaml(d);
    y.replace(y.find("source: ramp\n  slope: 1"), 23, "source: sinusoid\n  amplitude: 1\n  frequency: 1");
    y += "train:\n  iterations: 1500\n  harmonics: 4\n  learning_rate: 0.02\n";
    const RunConfig c = parse_config(y);
    cmd_simulate(c, log);
    const TrainState st = cmd_reconstruct(c, d / "ev.ernf", std::nullopt, log);
    REQUIRE(!st.trace.empty());
    CHECK(st.trace.back().loss < 1e-2 * st.trace.front().loss);
    std::ifstream trace(d / "trace.txt");
    std::string line;
    int rows = 0;
    while (std::getline(trace, line))
      if (!line.empty() && line[0] != '#') ++rows;
    CHECK(rows == 1500);
  }

  TEST_CASE("reconstruct: corrupt event file is BadMagic") {
    TempDir d("recbad");
    spit_text(d / "ev.ernf", "NOPE and some more bytes to read past the header ........");
    std::ostringstream log;
    CHECK(code_of([&] { cmd_reconstruct(parse_config(ramp_yaml(d)), d / "ev.ernf", std::nullopt, log); }) ==
          ErrorCode::BadMagic);
  }

  TEST_CASE("render then evaluate the stored field against its own renders") {
    TempDir d("eval");
    std::ostringstream log;
    const RunConfig c = parse_config(toy_yaml(d));
    write_checkpoint(d / "gt.erck", make_toy_field(c.scene.toy));
    cmd_render(c, d / "gt.erck", 3, d / "ref", log);
    const EvaluationReport r = cmd_evaluate(c, d / "gt.erck", d / "ref", log);
    REQUIRE(r.views.size() == 3);
    for (const ViewScore& v : r.views) {
      CHECK(v.psnr == std::numeric_limits<double>::infinity());
      CHECK(v.ssim == 1.0);
    }
    CHECK(log.str().find("mean,inf,1") != std::string::npos);
  }

  TEST_CASE("evaluation absorbs a per-channel rescale of the predictions") {
    Gen g(6);
    const RunConfig c = parse_config(toy_yaml(TempDir("unused")));
    const VoxelField field = make_toy_field(c.scene.toy);
    const Trajectory views = evaluation_views(c.trajectory, 2);
    const auto refs = render_views(field, views, c);
    auto pred = render_views(test::random_voxel_field(g, 4), views, c);
    const EvaluationReport base = evaluate_views(pred, refs);
    for (Image& im : pred)
      for (double& v : im.data) v *= 3.7;
    const EvaluationReport scaled = evaluate_views(pred, refs);
    for (std::size_t i = 0; i < base.views.size(); ++i) {
      CHECK(scaled.views[i].psnr == doctest::Approx(base.views[i].psnr).epsilon(1e-9));
      CHECK(scaled.views[i].ssim == doctest::Approx(base.views[i].ssim).epsilon(1e-9));
    }
    pred.pop_back();
    CHECK(code_of([&] { evaluate_views(pred, refs); }) == ErrorCode::ShapeMismatch);
  }

  TEST_CASE("evaluate rejects a reference directory with missing views") {
    TempDir d("evalmiss");
    std::ostringstream log;
    const RunConfig c = parse_config(toy_yaml(d));
    write_checkpoint(d / "gt.erck", make_toy_field(c.scene.toy));
    cmd_render(c, std::nullopt, 3, d / "ref", log);
    fs::remove(d / "ref" / "view_002.flt");
    CHECK(code_of([&] { cmd_evaluate(c, d / "gt.erck", d / "ref", log); }) == ErrorCode::ShapeMismatch);
  }

  TEST_CASE("stats: percentage of duration, self-sparsity and equivalent views") {
    TempDir d("stats");
    EventStream s;
    s.geometry = test::mono(100, 100);
    s.geometry.color_filter = ColorFilter::BayerRGGB;
    s.geometry.channels = 3;
    s.t_start = 0.0;
    s.t_end = 4.0;
    for (int i = 0; i < 1000; ++i) s.events.push_back({{i % 100, i / 100}, Polarity::Positive, 0.0, 0.001 * (i + 1)});
    sort_canonical(s);
    write_event_file(d / "s.ernf", s);
    std::ostringstream log;
    const StreamStats st = cmd_stats(d / "s.ernf", d / "s.ernf", 0.25, log);
    CHECK(duration_percent(s, 0.25) == doctest::Approx(6.25).epsilon(1e-12));
    REQUIRE(st.sparsity);
    CHECK(*st.sparsity == 1.0);
    CHECK(st.equivalent_views == doctest::Approx(0.1958).epsilon(1e-3));
    CHECK(log.str().find("6.25") != std::string::npos);
  }

  TEST_CASE("cli exit codes and determinism across thread counts") {
    TempDir d("cli");
    spit_text(d / "run.yaml", ramp_yaml(d, 0, 0.03));
    const fs::path log = d / "log.txt";
    CHECK(run_cli("simulate -c " + (d / "run.yaml").string() + " -j 1", log) == 0);
    const Bytes one = slurp(d / "ev.ernf");
    CHECK(run_cli("simulate -c " + (d / "run.yaml").string() + " -j 3", log) == 0);
    CHECK(slurp(d / "ev.ernf") == one);
    CHECK(run_cli("stats " + (d / "ev.ernf").string() + " --tau 0.25", log) == 0);
    CHECK(run_cli("", log) == 1);
    CHECK(run_cli("frobnicate", log) == 1);
    CHECK(run_cli("stats", log) == 1);
    spit_text(d / "bad.ernf", "NOPE................................................");
    CHECK(run_cli("stats " + (d / "bad.ernf").string(), log) == 2);
    spit_text(d / "bad.yaml", "sensor:\n  bogus: 1\n");
    CHECK(run_cli("simulate -c " + (d / "bad.yaml").string(), log) == 2);
    std::ifstream in(log);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    CHECK(text.find(":2") != std::string::npos);
  }

  TEST_CASE("cli: non-finite radiance exits with the numerical-failure code") {
    TempDir d("cli_nan");
    std::string y = ramp_yaml(d);
    y.replace(y.find("slope: 1"), 8, "slope: .nan");
    spit_text(d / "run.yaml", y);
    CHECK(run_cli("simulate -c " + (d / "run.yaml").string(), d / "log.txt") == 3);
  }
}

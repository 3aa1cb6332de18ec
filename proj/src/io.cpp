#include "ernf/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ernf {

namespace {

class Writer {
 public:
  template <class T>
  void put(T v) {
    static_assert(std::is_integral_v<T>);
    using U = std::make_unsigned_t<T>;
    const U u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
  void magic(const char* m) { out.insert(out.end(), m, m + 4); }
  Bytes out;
};

class Reader {
 public:
  explicit Reader(const Bytes& b) : bytes_(b) {}
  template <class T>
  T get() {
    static_assert(std::is_integral_v<T>);
    need(sizeof(T));
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  float f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  void magic(const char* m) {
    if (bytes_.size() < pos_ + 4 || std::memcmp(bytes_.data() + pos_, m, 4) != 0)
      fail(ErrorCode::BadMagic, std::string("expected magic ") + m);
    pos_ += 4;
  }
  void need(std::size_t n) const {
    if (bytes_.size() < pos_ + n) fail(ErrorCode::CorruptFile, "unexpected end of file");
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const Bytes& bytes_;
  std::size_t pos_ = 0;
};

Bytes read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_all(const fs::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

std::ofstream open_text(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

void check_version(std::uint8_t got, std::uint8_t want, const char* what) {
  if (got != want) fail(ErrorCode::CorruptFile, std::string("unsupported ") + what + " version " + std::to_string(got));
}

}  // namespace

std::int64_t to_ns(double seconds) {
  const double ns = seconds * 1e9;
  if (!std::isfinite(ns) || std::abs(ns) > 9.2e18) fail(ErrorCode::OutOfRange, "timestamp out of range");
  return static_cast<std::int64_t>(std::nearbyint(ns));
}

double from_ns(std::int64_t ns) { return static_cast<double>(ns) / 1e9; }

Bytes encode_events(const EventStream& stream) {
  const SensorGeometry& g = stream.geometry;
  g.validate();
  if (g.width > 0xFFFF || g.height > 0xFFFF) fail(ErrorCode::OutOfRange, "sensor too large for the event format");
  struct Rec {
    std::int64_t ns;
    std::uint16_t x, y;
    std::int8_t p;
  };
  std::vector<Rec> recs;
  recs.reserve(stream.size());
  for (const Event& e : stream.events) {
    if (!g.contains(e.u)) fail(ErrorCode::OutOfRange, "event outside the sensor");
    recs.push_back({to_ns(e.t_curr), static_cast<std::uint16_t>(e.u.x), static_cast<std::uint16_t>(e.u.y),
                    static_cast<std::int8_t>(e.p)});
  }
  std::stable_sort(recs.begin(), recs.end(), [](const Rec& a, const Rec& b) {
    return std::tie(a.ns, a.y, a.x) < std::tie(b.ns, b.y, b.x);
  });

  Writer w;
  w.out.reserve(kEventHeaderBytes + kEventRecordBytes * recs.size());
  w.magic("ERNF");
  w.put<std::uint8_t>(kEventFileVersion);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(g.width));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(g.height));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(g.channels));
  w.put<std::uint8_t>(0);
  w.put<std::int64_t>(to_ns(stream.t_start));
  w.put<std::int64_t>(to_ns(stream.t_end));
  w.put<std::uint64_t>(recs.size());
  for (const Rec& r : recs) {
    w.put<std::uint16_t>(r.x);
    w.put<std::uint16_t>(r.y);
    w.put<std::int8_t>(r.p);
    w.put<std::uint8_t>(0);
    w.put<std::uint16_t>(0);
    w.put<std::int64_t>(r.ns);
  }
  return std::move(w.out);
}

EventStream decode_events(const Bytes& bytes) {
  Reader r(bytes);
  r.magic("ERNF");
  check_version(r.get<std::uint8_t>(), kEventFileVersion, "event file");
  EventStream s;
  s.geometry.width = r.get<std::uint16_t>();
  s.geometry.height = r.get<std::uint16_t>();
  s.geometry.channels = r.get<std::uint8_t>();
  r.get<std::uint8_t>();
  if (s.geometry.channels != 1 && s.geometry.channels != 3) fail(ErrorCode::CorruptFile, "channels must be 1 or 3");
  s.geometry.color_filter = s.geometry.channels == 3 ? ColorFilter::BayerRGGB : ColorFilter::None;
  if (s.geometry.width == 0 || s.geometry.height == 0) fail(ErrorCode::CorruptFile, "empty sensor");
  const std::int64_t start_ns = r.get<std::int64_t>();
  const std::int64_t end_ns = r.get<std::int64_t>();
  s.t_start = from_ns(start_ns);
  s.t_end = from_ns(end_ns);
  const auto count = r.get<std::uint64_t>();
  if (count > r.remaining() / kEventRecordBytes || r.remaining() != count * kEventRecordBytes)
    fail(ErrorCode::CorruptFile, "record count does not match file size");

  std::vector<std::int64_t> last(s.geometry.pixel_count(), start_ns);
  s.events.reserve(count);
  std::int64_t prev_ns = std::numeric_limits<std::int64_t>::min();
  std::size_t prev_idx = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    Event e;
    e.u.x = r.get<std::uint16_t>();
    e.u.y = r.get<std::uint16_t>();
    const auto p = r.get<std::int8_t>();
    r.get<std::uint8_t>();
    r.get<std::uint16_t>();
    const auto ns = r.get<std::int64_t>();
    if (!s.geometry.contains(e.u)) fail(ErrorCode::CorruptFile, "event outside the sensor");
    if (p != 1 && p != -1) fail(ErrorCode::CorruptFile, "polarity must be +-1");
    const std::size_t idx = s.geometry.index(e.u);
    if (ns < prev_ns || (ns == prev_ns && idx <= prev_idx)) fail(ErrorCode::CorruptFile, "records are not sorted");
    prev_ns = ns;
    prev_idx = idx;
    e.p = static_cast<Polarity>(p);
    e.t_prev = from_ns(last[idx]);
    e.t_curr = from_ns(ns);
    last[idx] = ns;
    s.events.push_back(e);
  }
  return s;
}

void write_event_file(const fs::path& path, const EventStream& stream) { write_all(path, encode_events(stream)); }
EventStream read_event_file(const fs::path& path) { return decode_events(read_all(path)); }

void write_pose_file(const fs::path& path, const Trajectory& trajectory) {
  auto out = open_text(path);
  out << "# t px py pz qw qx qy qz\n";
  for (const PoseSample& p : trajectory.samples()) {
    const Quat& q = p.orientation;
    out << p.t << ' ' << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z() << ' ' << q.w() << ' '
        << q.x() << ' ' << q.y() << ' ' << q.z() << '\n';
  }
}

Trajectory read_pose_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::vector<PoseSample> samples;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream row(line);
    PoseSample p;
    double v[8];
    for (double& x : v)
      if (!(row >> x)) fail(ErrorCode::CorruptFile, path.string() + ":" + std::to_string(line_no) + ": expected 8 numbers");
    p.t = v[0];
    p.position = Vec3(v[1], v[2], v[3]);
    p.orientation = Quat(v[4], v[5], v[6], v[7]);
    samples.push_back(p);
  }
  if (samples.empty()) fail(ErrorCode::CorruptFile, "pose file has no samples");
  const double t0 = samples.front().t;
  const double rate =
      samples.size() > 1 ? static_cast<double>(samples.size() - 1) / (samples.back().t - t0) : 1.0;
  if (!(rate > 0.0) || !std::isfinite(rate)) fail(ErrorCode::CorruptFile, "pose times must increase");
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (std::abs(samples[i].t - (t0 + static_cast<double>(i) / rate)) > 1e-6 / rate)
      fail(ErrorCode::CorruptFile, "pose samples are not uniformly spaced");
  return Trajectory(t0, rate, std::move(samples));
}

void write_image(const fs::path& path, const Image& image) {
  std::ostringstream header;
  header << image.width << ' ' << image.height << ' ' << image.channels << '\n';
  Writer w;
  const std::string h = header.str();
  w.out.assign(h.begin(), h.end());
  for (double v : image.data) w.f32(static_cast<float>(v));
  write_all(path, w.out);
}

Image read_image(const fs::path& path) {
  const Bytes bytes = read_all(path);
  const auto nl = std::find(bytes.begin(), bytes.end(), '\n');
  if (nl == bytes.end()) fail(ErrorCode::CorruptFile, "image header missing");
  std::istringstream header(std::string(bytes.begin(), nl));
  int w = 0, h = 0, c = 0;
  if (!(header >> w >> h >> c) || w <= 0 || h <= 0 || c <= 0) fail(ErrorCode::CorruptFile, "bad image header");
  Image img(w, h, c);
  const Bytes body(nl + 1, bytes.end());
  if (body.size() != img.size() * 4) fail(ErrorCode::CorruptFile, "image size does not match header");
  Reader r(body);
  for (double& v : img.data) v = r.f32();
  return img;
}

void export_image_8bit(const fs::path& path, const Image& image, double scale) {
  if (image.channels != 1 && image.channels != 3) fail(ErrorCode::InvalidArgument, "8-bit export needs 1 or 3 channels");
  std::ostringstream header;
  header << (image.channels == 1 ? "P5" : "P6") << '\n' << image.width << ' ' << image.height << "\n255\n";
  const std::string h = header.str();
  Bytes out(h.begin(), h.end());
  for (double v : image.data) {
    const double x = std::pow(std::clamp(v / scale, 0.0, 1.0), 1.0 / 2.2);
    out.push_back(static_cast<std::uint8_t>(std::lround(255.0 * x)));
  }
  write_all(path, out);
}

namespace {
constexpr std::uint8_t kCheckpointVersion = 1;
constexpr std::uint8_t kVoxelKind = 0;
constexpr std::uint8_t kSignalKind = 1;
constexpr std::uint8_t kSidecarVersion = 1;

void put_params(Writer& w, std::span<const double> p) {
  w.put<std::uint64_t>(p.size());
  for (double v : p) w.f32(static_cast<float>(v));
}

std::vector<double> get_params(Reader& r, std::size_t expected) {
  const auto n = r.get<std::uint64_t>();
  if (n != expected) fail(ErrorCode::CorruptFile, "parameter count does not match header");
  std::vector<double> p(n);
  for (double& v : p) v = r.f32();
  return p;
}
}  // namespace

void write_checkpoint(const fs::path& path, const VoxelField& field) {
  Writer w;
  w.magic("ERCK");
  w.put<std::uint8_t>(kCheckpointVersion);
  w.put<std::uint8_t>(kVoxelKind);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(field.resolution()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(field.channels()));
  for (int i = 0; i < 3; ++i) w.f64(field.box().lo[i]);
  for (int i = 0; i < 3; ++i) w.f64(field.box().hi[i]);
  put_params(w, field.params());
  write_all(path, w.out);
}

void write_checkpoint(const fs::path& path, const TemporalSignalField& field) {
  Writer w;
  w.magic("ERCK");
  w.put<std::uint8_t>(kCheckpointVersion);
  w.put<std::uint8_t>(kSignalKind);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(field.geometry().width));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(field.geometry().height));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(field.geometry().channels));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(field.harmonics()));
  w.f64(field.t0());
  w.f64(field.period());
  put_params(w, field.params());
  write_all(path, w.out);
}

Checkpoint read_checkpoint(const fs::path& path) {
  const Bytes bytes = read_all(path);
  Reader r(bytes);
  r.magic("ERCK");
  check_version(r.get<std::uint8_t>(), kCheckpointVersion, "checkpoint");
  const auto kind = r.get<std::uint8_t>();
  if (kind == kVoxelKind) {
    const auto res = static_cast<int>(r.get<std::uint32_t>());
    const auto ch = static_cast<int>(r.get<std::uint32_t>());
    Aabb box;
    for (int i = 0; i < 3; ++i) box.lo[i] = r.f64();
    for (int i = 0; i < 3; ++i) box.hi[i] = r.f64();
    if (res < 2 || res > 1024 || ch < 1 || ch > 16) fail(ErrorCode::CorruptFile, "bad voxel checkpoint header");
    VoxelField field(res, box, ch);
    const auto p = get_params(r, field.param_count());
    std::copy(p.begin(), p.end(), field.params().begin());
    return VoxelCheckpoint{std::move(field)};
  }
  if (kind == kSignalKind) {
    SignalCheckpoint ck;
    ck.geometry.width = r.get<std::uint16_t>();
    ck.geometry.height = r.get<std::uint16_t>();
    ck.geometry.channels = r.get<std::uint8_t>();
    ck.geometry.color_filter = ck.geometry.channels == 3 ? ColorFilter::BayerRGGB : ColorFilter::None;
    ck.harmonics = static_cast<int>(r.get<std::uint32_t>());
    ck.t0 = r.f64();
    ck.period = r.f64();
    if (ck.harmonics < 0 || ck.harmonics > 4096) fail(ErrorCode::CorruptFile, "bad signal checkpoint header");
    ck.params = get_params(r, ck.geometry.pixel_count() * (2 * static_cast<std::size_t>(ck.harmonics) + 1));
    return ck;
  }
  fail(ErrorCode::CorruptFile, "unknown checkpoint kind");
}

TemporalSignalField to_signal_field(const SignalCheckpoint& ck) {
  TemporalSignalField f(ck.geometry, ck.harmonics, ck.t0, ck.period);
  std::copy(ck.params.begin(), ck.params.end(), f.params().begin());
  return f;
}

void write_train_sidecar(const fs::path& path, const TrainState& st) {
  Writer w;
  w.magic("ERTS");
  w.put<std::uint8_t>(kSidecarVersion);
  w.f64(st.intrinsics.c_neg);
  w.f64(st.intrinsics.ratio_raw);
  w.f64(st.intrinsics.tau_raw);
  w.f64(st.intrinsics.tau_max);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(st.iteration));
  for (const auto* v : {&st.field_moments.m, &st.field_moments.v, &st.intrinsic_moments.m, &st.intrinsic_moments.v}) {
    w.put<std::uint64_t>(v->size());
    for (double x : *v) w.f64(x);
  }
  write_all(path, w.out);
}

TrainState read_train_sidecar(const fs::path& path) {
  const Bytes bytes = read_all(path);
  Reader r(bytes);
  r.magic("ERTS");
  check_version(r.get<std::uint8_t>(), kSidecarVersion, "trainer sidecar");
  TrainState st;
  st.intrinsics.c_neg = r.f64();
  st.intrinsics.ratio_raw = r.f64();
  st.intrinsics.tau_raw = r.f64();
  st.intrinsics.tau_max = r.f64();
  st.iteration = static_cast<int>(r.get<std::uint64_t>());
  auto read_vec = [&] {
    const auto n = r.get<std::uint64_t>();
    if (n > r.remaining() / 8) fail(ErrorCode::CorruptFile, "moment array exceeds file size");
    std::vector<double> v(n);
    for (double& x : v) x = r.f64();
    return v;
  };
  st.field_moments.m = read_vec();
  st.field_moments.v = read_vec();
  st.intrinsic_moments.m = read_vec();
  st.intrinsic_moments.v = read_vec();
  if (st.field_moments.m.size() != st.field_moments.v.size() ||
      st.intrinsic_moments.m.size() != st.intrinsic_moments.v.size())
    fail(ErrorCode::CorruptFile, "moment arrays differ in length");
  return st;
}

void write_loss_trace(const fs::path& path, const std::vector<TraceEntry>& trace) {
  auto out = open_text(path);
  out << "# iteration loss ratio tau\n";
  for (const TraceEntry& e : trace) out << e.iteration << ' ' << e.loss << ' ' << e.ratio << ' ' << e.tau << '\n';
}

}  // namespace ernf

#include "uadrive/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace uadrive {

namespace {

constexpr char kMagic[8] = {'U', 'A', 'D', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(long long v) { u64(static_cast<std::uint64_t>(v)); }
  void i32(int v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  const std::vector<std::uint8_t>& data() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& buf, std::size_t end) : buf_(buf), end_(end) {}
  const std::uint8_t* take(std::size_t n) {
    if (n > end_ - pos_) throw CheckpointError("checkpoint truncated");
    const std::uint8_t* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint64_t u64() {
    const std::uint8_t* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  std::uint32_t u32() {
    const std::uint8_t* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  long long i64() { return static_cast<long long>(u64()); }
  int i32() { return static_cast<int>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    const std::uint8_t* p = take(static_cast<std::size_t>(n));
    return std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(n));
  }
  bool at_end() const { return pos_ == end_; }

 private:
  const std::vector<std::uint8_t>& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::string settings_text(const Checkpoint& c) {
  KeyValues kv = ppo_keys(c.hyper);
  for (auto& [k, v] : world_config_keys(c.world)) kv[k] = v;
  kv["reward.beta"] = format_double(c.reward.beta);
  kv["reward.beta_tilde"] = format_double(c.reward.beta_tilde);
  kv["reward.alpha"] = format_double(c.reward.alpha);
  kv["reward.alpha_tilde"] = format_double(c.reward.alpha_tilde);
  kv["reward.t_max"] = std::to_string(c.reward.t_max);
  return format_key_values(kv);
}

double take_double(KeyValues& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw CheckpointError("checkpoint settings lack '" + key + "'");
  const double v = std::stod(it->second);
  kv.erase(it);
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  if (c.params.flat.size() !=
      static_cast<Eigen::Index>(PolicyParams::parameter_count(c.params.input_size,
                                                              c.params.hidden_size)))
    throw CheckpointError("parameter vector does not match the network shape");
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kCheckpointVersion);
  w.i32(c.scenario);
  w.u32(c.informed ? 1u : 0u);
  w.i32(c.params.input_size);
  w.i32(c.params.hidden_size);
  w.i64(c.global_step);
  w.i32(c.episode);
  w.f64(c.episode_return);
  w.u64(c.seed);
  w.u64(c.config_hash);
  w.str(settings_text(c));
  w.u64(static_cast<std::uint64_t>(c.params.flat.size()));
  for (Eigen::Index i = 0; i < c.params.flat.size(); ++i) w.f64(c.params.flat[i]);
  const auto& body = w.data();
  const std::uint64_t sum =
      fnv1a64(std::string_view(reinterpret_cast<const char*>(body.data()), body.size()));
  Writer tail;
  tail.u64(sum);

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
    out.write(reinterpret_cast<const char*>(tail.data().data()), 8);
    if (!out) throw CheckpointError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                      std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(kMagic) + 8 || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError(path.string() + ": not a checkpoint file");
  const std::size_t body = buf.size() - 8;
  Reader sum_reader(buf, buf.size());
  sum_reader.take(body);
  const std::uint64_t stored = sum_reader.u64();
  if (stored != fnv1a64(std::string_view(reinterpret_cast<const char*>(buf.data()), body)))
    throw CheckpointError(path.string() + ": checksum mismatch");

  Reader r(buf, body);
  r.take(sizeof(kMagic));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError(path.string() + ": unsupported version " + std::to_string(version));
  Checkpoint c;
  c.scenario = r.i32();
  c.informed = r.u32() != 0;
  const int input = r.i32();
  const int hidden = r.i32();
  c.global_step = r.i64();
  c.episode = r.i32();
  c.episode_return = r.f64();
  c.seed = r.u64();
  c.config_hash = r.u64();
  KeyValues kv;
  try {
    kv = parse_key_values(r.str());
    take_ppo_keys(kv, c.hyper);
    take_world_keys(kv, c.world);
    c.reward.beta = take_double(kv, "reward.beta");
    c.reward.beta_tilde = take_double(kv, "reward.beta_tilde");
    c.reward.alpha = take_double(kv, "reward.alpha");
    c.reward.alpha_tilde = take_double(kv, "reward.alpha_tilde");
    c.reward.t_max = static_cast<int>(take_double(kv, "reward.t_max"));
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(path.string() + ": bad settings block: " + e.what());
  }
  if (!kv.empty()) throw CheckpointError(path.string() + ": unknown setting '" + kv.begin()->first + "'");
  if (input != observation_size(c.informed))
    throw CheckpointError(path.string() + ": input size does not match informedness");
  const std::uint64_t n = r.u64();
  if (n != PolicyParams::parameter_count(input, hidden))
    throw CheckpointError(path.string() + ": parameter count does not match the network shape");
  c.params = PolicyParams::zeros(input, hidden);
  for (std::uint64_t i = 0; i < n; ++i) c.params.flat[static_cast<Eigen::Index>(i)] = r.f64();
  if (!r.at_end()) throw CheckpointError(path.string() + ": trailing bytes");
  return c;
}

void write_checkpoint_manifest(const Checkpoint& c, const std::filesystem::path& path) {
  std::filesystem::path manifest = path;
  manifest += ".manifest.txt";
  KeyValues kv;
  kv["checkpoint"] = path.filename().string();
  kv["format_version"] = std::to_string(kCheckpointVersion);
  kv["scenario"] = std::to_string(c.scenario);
  kv["informed"] = c.informed ? "true" : "false";
  kv["input_size"] = std::to_string(c.params.input_size);
  kv["hidden_size"] = std::to_string(c.params.hidden_size);
  kv["global_step"] = std::to_string(c.global_step);
  kv["episode"] = std::to_string(c.episode);
  kv["episode_return"] = format_double(c.episode_return);
  kv["seed"] = std::to_string(c.seed);
  kv["config_hash"] = hex64(c.config_hash);
  std::ofstream out(manifest);
  if (!out) throw CheckpointError("cannot write " + manifest.string());
  out << format_key_values(kv);
}

}  // namespace uadrive

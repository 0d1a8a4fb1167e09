#include "pointcpr/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pointcpr/errors.hpp"

namespace pointcpr {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

constexpr char kMagic[8] = {'P', 'C', 'P', 'R', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void doubles(std::span<const double> v) { bytes(v.data(), v.size() * sizeof(double)); }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& data, std::size_t end) : data_(data), end_(end) {}

  template <typename T>
  T get(const char* field) {
    T v;
    need(sizeof(T), field);
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string text(std::size_t n, const char* field) {
    need(n, field);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles(std::size_t n, const char* field) {
    if (n > (end_ - pos_) / sizeof(double)) throw CheckpointError(field, "truncated");
    std::vector<double> v(n);
    std::memcpy(v.data(), data_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  std::size_t remaining() const { return end_ - pos_; }

 private:
  void need(std::size_t n, const char* field) const {
    if (n > end_ - pos_) throw CheckpointError(field, "truncated");
  }

  const std::string& data_;
  std::size_t end_;
  std::size_t pos_ = sizeof(kMagic);
};

std::uint32_t crc32_of(const std::string& s, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  const auto* p = reinterpret_cast<const Bytef*>(s.data());
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string serialize(const PointCprModel& model, std::size_t step, std::uint64_t seed, const AdamW* adam) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.target));
  const std::string cfg = config_to_text(model.config);
  w.put<std::uint64_t>(cfg.size());
  w.bytes(cfg.data(), cfg.size());
  w.put<std::uint64_t>(step);
  w.put<std::uint64_t>(seed);
  const auto& items = model.params.items();
  w.put<std::uint64_t>(items.size());
  for (const auto& p : items) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t e : p.tensor.shape()) w.put<std::uint64_t>(e);
    w.doubles(p.tensor.data());
  }
  const bool with_opt = adam != nullptr && adam->first_moments().size() == items.size();
  w.put<std::uint8_t>(with_opt ? 1 : 0);
  if (with_opt) {
    w.put<std::uint64_t>(adam->steps_taken());
    for (std::size_t i = 0; i < items.size(); ++i) {
      w.doubles(adam->first_moments()[i]);
      w.doubles(adam->second_moments()[i]);
    }
  }
  w.put<std::uint32_t>(crc32_of(w.str(), w.str().size()));
  return std::move(w.str());
}

}  // namespace

std::string serialize_checkpoint(const TrainState& state, bool include_optimizer) {
  return serialize(state.model, state.step, state.seed, include_optimizer ? &state.optimizer : nullptr);
}

std::string serialize_checkpoint(const PointCprModel& model) {
  return serialize(model, 0, model.config.seed, nullptr);
}

LoadedCheckpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("magic", "not a checkpoint file");
  }
  if (bytes.size() < sizeof(kMagic) + 2 * sizeof(std::uint32_t)) throw CheckpointError("checksum", "truncated");
  const std::size_t body = bytes.size() - sizeof(std::uint32_t);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof stored);
  if (stored != crc32_of(bytes, body)) throw CheckpointError("checksum", "CRC-32 mismatch; file is corrupt");

  Reader r(bytes, body);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("version", "file version " + std::to_string(version) + ", this build reads " +
                                         std::to_string(kCheckpointVersion));
  }
  const auto target_raw = r.get<std::uint32_t>("target");
  if (target_raw > static_cast<std::uint32_t>(ModelTarget::classifier)) {
    throw CheckpointError("target", "unknown model target " + std::to_string(target_raw));
  }
  const auto cfg_len = r.get<std::uint64_t>("config");
  if (cfg_len > r.remaining()) throw CheckpointError("config", "truncated");
  ModelConfig config;
  try {
    config = parse_config(r.text(cfg_len, "config"), "<checkpoint>");
  } catch (const std::exception& e) {
    throw CheckpointError("config", e.what());
  }
  const auto step = r.get<std::uint64_t>("step");
  const auto seed = r.get<std::uint64_t>("seed");

  LoadedCheckpoint out;
  try {
    out.state.model = build_model(config, static_cast<ModelTarget>(target_raw), seed);
  } catch (const std::exception& e) {
    throw CheckpointError("config", e.what());
  }
  out.state.optimizer = AdamW(out.state.model.params, config.optim);
  out.state.step = step;
  out.state.seed = seed;

  auto& items = out.state.model.params.items();
  const auto count = r.get<std::uint64_t>("params");
  if (count != items.size()) {
    throw CheckpointError("params", "file has " + std::to_string(count) + " tensors, model expects " +
                                        std::to_string(items.size()));
  }
  for (auto& p : items) {
    const auto name_len = r.get<std::uint32_t>("params");
    const std::string name = r.text(name_len, "params");
    if (name != p.name) throw CheckpointError("params", "expected tensor '" + p.name + "', found '" + name + "'");
    const auto rank = r.get<std::uint32_t>("params");
    if (rank != p.tensor.rank()) throw CheckpointError("params", "rank mismatch for '" + name + "'");
    for (std::size_t a = 0; a < rank; ++a) {
      if (r.get<std::uint64_t>("params") != p.tensor.dim(a)) {
        throw CheckpointError("params", "shape mismatch for '" + name + "'");
      }
    }
    const auto values = r.doubles(p.tensor.numel(), "params");
    std::copy(values.begin(), values.end(), p.tensor.mutable_data().begin());
  }

  const auto has_opt = r.get<std::uint8_t>("optimizer");
  if (has_opt > 1) throw CheckpointError("optimizer", "invalid presence flag");
  if (has_opt == 1) {
    const auto t = r.get<std::uint64_t>("optimizer");
    std::vector<std::vector<double>> m, v;
    for (const auto& p : items) {
      m.push_back(r.doubles(p.tensor.numel(), "optimizer"));
      v.push_back(r.doubles(p.tensor.numel(), "optimizer"));
    }
    out.state.optimizer.restore(t, std::move(m), std::move(v));
    out.has_optimizer = true;
  } else {
    out.warnings.push_back("checkpoint has no optimizer state; loaded weights only");
  }
  if (r.remaining() != 0) throw CheckpointError("trailer", "unexpected bytes before checksum");
  return out;
}

void save_checkpoint(const std::string& path, const TrainState& state, bool include_optimizer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("path", "cannot open '" + path + "' for writing");
  const std::string bytes = serialize_checkpoint(state, include_optimizer);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("path", "failed writing '" + path + "'");
}

void save_checkpoint(const std::string& path, const PointCprModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("path", "cannot open '" + path + "' for writing");
  const std::string bytes = serialize_checkpoint(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("path", "failed writing '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("path", "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace pointcpr

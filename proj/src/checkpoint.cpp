#include "crl/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <type_traits>

#include "crl/errors.hpp"

namespace crl {
namespace {

constexpr char kMagic[8] = {'C', 'R', 'L', 'S', 'U', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const unsigned char* data, std::size_t n,
                    std::uint64_t h = 1469598103934665603ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 1099511628211ULL;
  }
  return h;
}

template <class T>
void put(std::string& buf, const T& value) {
  static_assert(std::is_trivially_copyable_v<T>);
  const auto* p = reinterpret_cast<const char*>(&value);
  buf.append(p, sizeof(T));
}

template <class T>
T take(const std::string& buf, std::size_t& pos) {
  static_assert(std::is_trivially_copyable_v<T>);
  if (pos + sizeof(T) > buf.size()) {
    throw DataError("checkpoint file truncated");
  }
  T value;
  std::memcpy(&value, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const Checkpoint& ckpt) {
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put(buf, kVersion);
  put(buf, static_cast<std::int32_t>(ckpt.config.vocab_size));
  put(buf, static_cast<std::int32_t>(ckpt.config.hidden_size));
  put(buf, static_cast<std::int32_t>(ckpt.config.context_window));
  put(buf, ckpt.config.temperature);
  put(buf, ckpt.train_step);
  put(buf, static_cast<std::uint64_t>(ckpt.rng_state.size()));
  buf.append(ckpt.rng_state);
  put(buf, static_cast<std::uint64_t>(ckpt.params.size()));
  for (double p : ckpt.params) put(buf, p);
  const std::uint64_t checksum =
      fnv1a(reinterpret_cast<const unsigned char*>(buf.data()), buf.size());
  put(buf, checksum);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());

  if (buf.size() < sizeof(kMagic) + sizeof(std::uint64_t) ||
      std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint file: " + path.string());
  }
  const std::size_t body = buf.size() - sizeof(std::uint64_t);
  std::size_t pos = body;
  const std::uint64_t stored = take<std::uint64_t>(buf, pos);
  const std::uint64_t actual =
      fnv1a(reinterpret_cast<const unsigned char*>(buf.data()), body);
  if (stored != actual) {
    throw DataError("checkpoint checksum mismatch (corrupt or truncated): " +
                    path.string());
  }

  pos = sizeof(kMagic);
  const auto version = take<std::uint32_t>(buf, pos);
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " +
                    std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config.vocab_size = take<std::int32_t>(buf, pos);
  ckpt.config.hidden_size = take<std::int32_t>(buf, pos);
  ckpt.config.context_window = take<std::int32_t>(buf, pos);
  ckpt.config.temperature = take<double>(buf, pos);
  ckpt.train_step = take<std::int64_t>(buf, pos);
  const auto rng_len = take<std::uint64_t>(buf, pos);
  if (pos + rng_len > body) throw DataError("checkpoint file truncated");
  ckpt.rng_state.assign(buf.data() + pos, rng_len);
  pos += rng_len;
  const auto n_params = take<std::uint64_t>(buf, pos);
  ckpt.params.reserve(n_params);
  for (std::uint64_t i = 0; i < n_params; ++i) {
    ckpt.params.push_back(take<double>(buf, pos));
  }
  if (pos != body) throw DataError("checkpoint has trailing bytes");
  return ckpt;
}

Checkpoint checkpoint_of(const SeqModel& model, std::int64_t train_step,
                         std::string rng_state) {
  Checkpoint ckpt;
  ckpt.config = model.config();
  ckpt.params.assign(model.params().begin(), model.params().end());
  ckpt.train_step = train_step;
  ckpt.rng_state = std::move(rng_state);
  return ckpt;
}

SeqModel model_from_checkpoint(const Checkpoint& ckpt) {
  SeqModel model(ckpt.config);
  if (ckpt.params.size() != model.param_count()) {
    throw DataError("checkpoint parameter count does not match its config");
  }
  std::copy(ckpt.params.begin(), ckpt.params.end(), model.params().begin());
  return model;
}

void require_config(const Checkpoint& ckpt, const ModelConfig& expected) {
  if (!(ckpt.config == expected)) {
    throw DataError(
        "checkpoint config mismatch: checkpoint has vocab_size=" +
        std::to_string(ckpt.config.vocab_size) +
        " hidden_size=" + std::to_string(ckpt.config.hidden_size) +
        ", expected vocab_size=" + std::to_string(expected.vocab_size) +
        " hidden_size=" + std::to_string(expected.hidden_size));
  }
}

}  // namespace crl

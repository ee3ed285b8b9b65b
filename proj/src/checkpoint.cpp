#include "nqreader/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace nqreader {

namespace {

constexpr char kMagic[4] = {'N', 'Q', 'R', 'D'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
T byteswap_if_big(T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::little) return v;
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  T out;
  std::memcpy(&out, bytes, sizeof(T));
  return out;
}

template <typename T>
void write_scalar(std::ostream& out, T v) {
  T le = byteswap_if_big(v);
  out.write(reinterpret_cast<const char*>(&le), sizeof(T));
}

template <typename T>
T read_scalar(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("checkpoint: unexpected end of file");
  return byteswap_if_big(v);
}

void write_string(std::ostream& out, const std::string& s) {
  write_scalar<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  std::uint64_t len = read_scalar<std::uint64_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("checkpoint: unexpected end of file");
  return s;
}

// row-major f64 payload
void write_matrix(std::ostream& out, const Matrix& m) {
  write_scalar<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  write_scalar<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) write_scalar<double>(out, m(i, j));
}

Matrix read_matrix(std::istream& in) {
  auto rows = static_cast<Index>(read_scalar<std::uint64_t>(in));
  auto cols = static_cast<Index>(read_scalar<std::uint64_t>(in));
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = read_scalar<double>(in);
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const ModelParams& params, const AdamState* optimizer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_scalar<std::uint32_t>(out, kVersion);
  write_string(out, config_to_json(config));

  auto named = named_parameters(params);
  write_scalar<std::uint64_t>(out, named.size());
  for (const auto& [name, tensor] : named) {
    write_string(out, name);
    write_matrix(out, tensor.value());
  }

  write_scalar<std::uint8_t>(out, optimizer ? 1 : 0);
  if (optimizer) {
    if (optimizer->slots.size() != named.size())
      throw ShapeError("checkpoint: optimizer slots do not match parameters");
    write_scalar<std::uint64_t>(out, static_cast<std::uint64_t>(optimizer->step));
    write_scalar<double>(out, optimizer->learning_rate);
    write_scalar<double>(out, optimizer->beta1);
    write_scalar<double>(out, optimizer->beta2);
    write_scalar<double>(out, optimizer->epsilon);
    for (const AdamState::Slot& slot : optimizer->slots) {
      write_matrix(out, slot.first_moment);
      write_matrix(out, slot.second_moment);
    }
  }
  if (!out) throw DataError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("checkpoint: bad magic in " + path);
  std::uint32_t version = read_scalar<std::uint32_t>(in);
  if (version != kVersion)
    throw DataError("checkpoint: unrecognized version " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.config = config_from_json(read_string(in));
  ckpt.config.validate();
  Rng rng(ckpt.config.seed);
  ckpt.params = model_init(ckpt.config, rng);

  auto named = named_parameters(ckpt.params);
  std::uint64_t count = read_scalar<std::uint64_t>(in);
  if (count != named.size())
    throw DataError("checkpoint: expected " + std::to_string(named.size()) + " tensors, found " +
                    std::to_string(count));
  for (auto& [name, tensor] : named) {
    std::string stored = read_string(in);
    if (stored != name)
      throw DataError("checkpoint: tensor '" + stored + "' where '" + name + "' expected");
    Matrix value = read_matrix(in);
    if (value.rows() != tensor.rows() || value.cols() != tensor.cols())
      throw DataError("checkpoint: tensor '" + name + "' has shape " +
                      shape_str(value.rows(), value.cols()) + ", config requires " +
                      shape_str(tensor.rows(), tensor.cols()));
    tensor.value() = std::move(value);
  }

  std::uint8_t has_optimizer = read_scalar<std::uint8_t>(in);
  if (has_optimizer) {
    AdamState state;
    state.step = static_cast<long>(read_scalar<std::uint64_t>(in));
    state.learning_rate = read_scalar<double>(in);
    state.beta1 = read_scalar<double>(in);
    state.beta2 = read_scalar<double>(in);
    state.epsilon = read_scalar<double>(in);
    for (std::size_t i = 0; i < named.size(); ++i) {
      AdamState::Slot slot;
      slot.first_moment = read_matrix(in);
      slot.second_moment = read_matrix(in);
      state.slots.push_back(std::move(slot));
    }
    ckpt.optimizer = std::move(state);
  }
  return ckpt;
}

}  // namespace nqreader

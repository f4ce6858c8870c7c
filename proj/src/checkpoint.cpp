#include "anchorpt/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "anchorpt/error.hpp"

namespace anchorpt {
namespace {

constexpr std::array<char, 8> kMagic = {'A', 'N', 'C', 'H', 'O', 'R', 'P', 'T'};

template <class T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <class T>
T read_le(std::istream& in, const std::string& path) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == EOF) throw Error("truncated checkpoint '" + path + "'");
    value |= static_cast<T>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return value;
}

void write_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    write_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(m.data()[i])));
  }
}

struct RawTensor {
  std::uint32_t rows = 0, cols = 0;
  std::vector<float> values;
};

void fill(EncoderParameters& target, const std::string& prefix,
          std::map<std::string, RawTensor>& tensors, const std::string& path) {
  target.for_each([&](const std::string& name, Matrix& m) {
    auto it = tensors.find(prefix + name);
    if (it == tensors.end()) throw Error("checkpoint '" + path + "' lacks tensor '" + prefix + name + "'");
    const RawTensor& raw = it->second;
    if (raw.rows != m.rows() || raw.cols != m.cols()) {
      throw ShapeError("tensor '" + prefix + name + "' in '" + path + "' has shape " +
                       std::to_string(raw.rows) + "x" + std::to_string(raw.cols) + ", expected " +
                       std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(raw.values[static_cast<std::size_t>(i)]);
    tensors.erase(it);
  });
}

}  // namespace

nlohmann::json config_to_json(const EncoderConfig& c) {
  return {{"layers", c.layers}, {"heads", c.heads},           {"hidden", c.hidden},
          {"ffn_dim", c.ffn_dim}, {"vocab_size", c.vocab_size}, {"max_len", c.max_len},
          {"dropout", c.dropout}};
}

EncoderConfig config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.hidden = j.value("hidden", c.hidden);
  c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.max_len = j.value("max_len", c.max_len);
  c.dropout = j.value("dropout", c.dropout);
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");

  nlohmann::json header;
  header["config"] = config_to_json(ckpt.config);
  header["vocab"] = ckpt.vocab.terms();
  header["optimizer_step"] = ckpt.optimizer ? ckpt.optimizer->step : -1;
  header["metadata"] = ckpt.metadata;
  const std::string text = header.dump();

  out.write(kMagic.data(), kMagic.size());
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));

  std::uint32_t count = 0;
  ckpt.params.for_each([&count](const std::string&, const Matrix&) { ++count; });
  write_le<std::uint32_t>(out, ckpt.optimizer ? 3 * count : count);
  ckpt.params.for_each([&](const std::string& name, const Matrix& m) { write_tensor(out, name, m); });
  if (ckpt.optimizer) {
    ckpt.optimizer->first_moment.for_each(
        [&](const std::string& name, const Matrix& m) { write_tensor(out, "adam.m/" + name, m); });
    ckpt.optimizer->second_moment.for_each(
        [&](const std::string& name, const Matrix& m) { write_tensor(out, "adam.v/" + name, m); });
  }
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path, const std::optional<EncoderConfig>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error("'" + path + "' is not a checkpoint file");
  const auto version = read_le<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw Error("checkpoint '" + path + "' has version " + std::to_string(version) +
                ", expected " + std::to_string(kCheckpointVersion));
  }
  const auto header_len = read_le<std::uint64_t>(in, path);
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw Error("truncated checkpoint header in '" + path + "'");
  const auto header = nlohmann::json::parse(text);

  Checkpoint ckpt;
  ckpt.config = config_from_json(header.at("config"));
  ckpt.config.validate();
  if (expected && !(*expected == ckpt.config)) {
    throw ShapeError("checkpoint '" + path + "' config " + config_to_json(ckpt.config).dump() +
                     " does not match expected " + config_to_json(*expected).dump());
  }
  ckpt.vocab = Vocabulary(header.at("vocab").get<std::vector<std::string>>());
  if (ckpt.vocab.size() != static_cast<std::size_t>(ckpt.config.vocab_size)) {
    throw ShapeError("checkpoint vocabulary size disagrees with its config");
  }
  ckpt.metadata = header.value("metadata", nlohmann::json::object());

  std::map<std::string, RawTensor> tensors;
  const auto count = read_le<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_le<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    RawTensor raw;
    raw.rows = read_le<std::uint32_t>(in, path);
    raw.cols = read_le<std::uint32_t>(in, path);
    raw.values.resize(static_cast<std::size_t>(raw.rows) * raw.cols);
    for (auto& v : raw.values) v = std::bit_cast<float>(read_le<std::uint32_t>(in, path));
    tensors.emplace(std::move(name), std::move(raw));
  }

  ckpt.params = EncoderParameters::zeros(ckpt.config);
  fill(ckpt.params, "", tensors, path);
  const auto step = header.value("optimizer_step", std::int64_t{-1});
  if (step >= 0) {
    AdamState state = AdamState::zeros(ckpt.config);
    fill(state.first_moment, "adam.m/", tensors, path);
    fill(state.second_moment, "adam.v/", tensors, path);
    state.step = step;
    ckpt.optimizer = std::move(state);
  }
  if (!tensors.empty()) throw Error("checkpoint '" + path + "' has unexpected tensor '" + tensors.begin()->first + "'");
  return ckpt;
}

}  // namespace anchorpt

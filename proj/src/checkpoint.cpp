#include "rntn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace rntn {

namespace {

constexpr char kMagic[4] = {'R', 'N', 'T', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& out, double d) {
  write_u64(out, std::bit_cast<std::uint64_t>(d));
}

double read_f64(std::istream& in) {
  return std::bit_cast<double>(read_u64(in));
}

}  // namespace

void save_checkpoint(const std::string& path, Model& model, const Vocab& vocab,
                     TokenLevel level) {
  if (vocab.size() != model.vocab_size)
    throw std::invalid_argument("save_checkpoint: vocab size " +
                                std::to_string(vocab.size()) +
                                " does not match model vocab " +
                                std::to_string(model.vocab_size));

  nlohmann::json manifest;
  manifest["cell"] = std::string(cell_kind_name(model.kind));
  manifest["embed_dim"] = model.embed_dim;
  manifest["hidden_dim"] = model.hidden_dim;
  manifest["task"] = std::string(token_level_name(level));
  manifest["vocab"] = vocab.id_to_token;
  manifest["eos_id"] = vocab.eos_id;
  manifest["unk_id"] = vocab.unk_id;
  manifest["cap"] = vocab.cap;
  const std::string manifest_bytes = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  write_u32(out, kFormatVersion);
  write_u64(out, manifest_bytes.size());
  out.write(manifest_bytes.data(),
            static_cast<std::streamsize>(manifest_bytes.size()));
  for (const auto& ref : param_refs(model))
    for (double v : *ref.values) write_f64(out, v);
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::string_view(magic, 4) != std::string_view(kMagic, 4))
    throw std::runtime_error("not a checkpoint file: " + path);
  const std::uint32_t version = read_u32(in);
  if (version != kFormatVersion)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version) + " in " + path);

  const std::uint64_t manifest_len = read_u64(in);
  std::string manifest_bytes(manifest_len, '\0');
  in.read(manifest_bytes.data(), static_cast<std::streamsize>(manifest_len));
  if (!in) throw std::runtime_error("truncated checkpoint manifest: " + path);
  const nlohmann::json manifest = nlohmann::json::parse(manifest_bytes);

  Checkpoint ckpt;
  ckpt.level = parse_token_level(manifest.at("task").get<std::string>());
  ckpt.vocab.id_to_token =
      manifest.at("vocab").get<std::vector<std::string>>();
  ckpt.vocab.eos_id = manifest.at("eos_id").get<int>();
  ckpt.vocab.unk_id = manifest.at("unk_id").get<int>();
  ckpt.vocab.cap = manifest.at("cap").get<std::size_t>();
  for (std::size_t id = 0; id < ckpt.vocab.id_to_token.size(); ++id)
    ckpt.vocab.token_to_id.emplace(ckpt.vocab.id_to_token[id],
                                   static_cast<int>(id));

  ckpt.model = Model(parse_cell_kind(manifest.at("cell").get<std::string>()),
                     manifest.at("embed_dim").get<std::size_t>(),
                     manifest.at("hidden_dim").get<std::size_t>(),
                     ckpt.vocab.size());

  for (const auto& ref : param_refs(ckpt.model))
    for (double& v : *ref.values) v = read_f64(in);
  if (!in) throw std::runtime_error("truncated checkpoint payload: " + path);

  // The payload must end exactly at the parameter count for these dims.
  in.peek();
  if (!in.eof())
    throw std::runtime_error("checkpoint payload longer than manifest dims: " +
                             path);
  return ckpt;
}

}  // namespace rntn

#include "hsum/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hsum/array_io.hpp"
#include "hsum/error.hpp"

namespace hsum {
namespace {

template <class T>
void put_le(std::ostream& out, T v) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  }
  out.write(bytes.data(), bytes.size());
}

template <class T>
T get_le(std::istream& in, const std::string& where) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) {
    throw SchemaError(where + ": truncated checkpoint header");
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const nlohmann::json& metadata) {
  nlohmann::json header;
  header["format"] = kCheckpointFormat;
  header["config"] = to_json(model.config());
  nlohmann::json names = nlohmann::json::array();
  for (const auto& [name, var] : model.parameters()) {
    names.push_back(name);
  }
  header["tensors"] = names;
  header["metadata"] = metadata;
  const std::string text = header.dump();

  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FileError("cannot write checkpoint '" + path.string() + "'");
  }
  out.write(kCheckpointMagic, 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, var] : model.parameters()) {
    write_array(out, var.value());
  }
  if (!out) {
    throw FileError("failed writing checkpoint '" + path.string() + "'");
  }
}

Model load_checkpoint(const std::filesystem::path& path, nlohmann::json* metadata) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FileError("cannot open checkpoint '" + path.string() + "'");
  }
  const std::string where = path.string();
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw SchemaError(where + ": not a checkpoint (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(in, where);
  if (version != kCheckpointVersion) {
    throw SchemaError(where + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto length = get_le<std::uint64_t>(in, where);
  if (length > (1u << 26)) {
    throw SchemaError(where + ": implausible header length");
  }
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) {
    throw SchemaError(where + ": truncated checkpoint header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(where + ": invalid checkpoint header: " + e.what());
  }
  if (header.value("format", "") != kCheckpointFormat) {
    throw SchemaError(where + ": unknown checkpoint format tag");
  }
  const ModelConfig config = model_config_from_json(header.at("config"));
  std::map<std::string, Matrix> tensors;
  for (const auto& name : header.at("tensors")) {
    const std::string n = name.get<std::string>();
    tensors.emplace(n, read_array(in, where + ":" + n));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw SchemaError(where + ": trailing bytes after the last tensor");
  }
  if (metadata != nullptr) {
    *metadata = header.value("metadata", nlohmann::json::object());
  }
  return Model(config, tensors);
}

}  // namespace hsum

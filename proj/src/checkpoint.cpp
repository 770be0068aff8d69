#include "tk/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tk {

namespace {

static_assert(sizeof(float) == 4);

void put_le32(std::ostream& os, float f) {
  auto u = std::bit_cast<std::uint32_t>(f);
  char b[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
               static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
  os.write(b, 4);
}

float get_le32(const unsigned char* b) {
  const std::uint32_t u = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                          (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return std::bit_cast<float>(u);
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const ParameterStore<double>& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path.string());
  os << kCheckpointVersion << '\n' << "entries " << params.entries().size() << '\n';
  for (const auto& [name, t] : params.entries()) {
    os << name << ' ' << t.shape().size();
    for (Index d : t.shape()) os << ' ' << d;
    os << ' ' << t.size() * 4 << '\n';
  }
  os << "data\n";
  for (const auto& [_, t] : params.entries()) {
    for (Index i = 0; i < t.size(); ++i) put_le32(os, static_cast<float>(t.data()[i]));
  }
  if (!os) throw DataError("failed writing checkpoint: " + path.string());
}

CheckpointArchive read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != kCheckpointVersion) {
    throw SchemaError("checkpoint " + path.string() + ": expected header '" + kCheckpointVersion + "'");
  }
  std::size_t count = 0;
  {
    std::getline(is, line);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag >> count) || tag != "entries") throw SchemaError("checkpoint: malformed entry count");
  }
  struct Pending {
    std::string name;
    Shape shape;
    std::size_t bytes;
  };
  std::vector<Pending> pending;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(is, line)) throw IntegrityError("checkpoint: truncated entry table");
    std::istringstream ls(line);
    Pending p;
    std::size_t rank = 0;
    if (!(ls >> p.name >> rank)) throw SchemaError("checkpoint: malformed entry line '" + line + "'");
    p.shape.resize(rank);
    for (auto& d : p.shape) ls >> d;
    if (!(ls >> p.bytes)) throw SchemaError("checkpoint: malformed entry line '" + line + "'");
    if (p.bytes != static_cast<std::size_t>(shape_numel(p.shape)) * 4) {
      throw SchemaError("checkpoint: entry '" + p.name + "' byte count does not match its shape");
    }
    pending.push_back(std::move(p));
  }
  if (!std::getline(is, line) || line != "data") throw SchemaError("checkpoint: missing data marker");
  CheckpointArchive out;
  std::vector<unsigned char> buf;
  for (const auto& p : pending) {
    buf.resize(p.bytes);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(p.bytes));
    if (static_cast<std::size_t>(is.gcount()) != p.bytes) {
      throw IntegrityError("checkpoint: payload for '" + p.name + "' is truncated");
    }
    CheckpointEntry e{p.shape, std::vector<float>(p.bytes / 4)};
    for (std::size_t k = 0; k < e.values.size(); ++k) e.values[k] = get_le32(buf.data() + 4 * k);
    out.emplace(p.name, std::move(e));
  }
  return out;
}

void load_checkpoint(const std::filesystem::path& path, ParameterStore<double>& params) {
  const CheckpointArchive archive = read_checkpoint(path);
  if (archive.size() != params.entries().size()) {
    throw SchemaError("checkpoint holds " + std::to_string(archive.size()) + " tensors, model expects " +
                      std::to_string(params.entries().size()));
  }
  for (auto& [name, t] : params.entries()) {
    auto it = archive.find(name);
    if (it == archive.end()) throw SchemaError("checkpoint is missing parameter '" + name + "'");
    if (it->second.shape != t.shape()) {
      throw SchemaError("checkpoint parameter '" + name + "' has shape " + shape_str(it->second.shape) +
                        ", model expects " + shape_str(t.shape()));
    }
    for (Index i = 0; i < t.size(); ++i) t.data()[i] = it->second.values[static_cast<std::size_t>(i)];
  }
}

void round_to_checkpoint_precision(ParameterStore<double>& params) {
  for (auto& [_, t] : params.entries()) {
    for (Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<float>(t.data()[i]);
  }
}

}  // namespace tk

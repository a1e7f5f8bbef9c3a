#include "ddgcn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "ddgcn/errors.hpp"

namespace ddgcn {

namespace {

constexpr const char* kMagic = "ddgcn-checkpoint 1";

void write_doubles_le(std::ostream& os, std::span<const double> values) {
  // Byte order pinned explicitly so files travel between hosts.
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 8);
  }
}

void read_doubles_le(std::istream& is, std::vector<double>& out) {
  for (double& v : out) {
    unsigned char buf[8];
    if (!is.read(reinterpret_cast<char*>(buf), 8)) {
      throw DataError("checkpoint: truncated value block");
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    std::memcpy(&v, &bits, sizeof v);
  }
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& entries) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("checkpoint: cannot open '" + path + "' for writing");
  os << kMagic << "\n" << entries.size() << "\n";
  for (const auto& [key, tensor] : entries) {
    if (key.empty() || key.find_first_of(" \t\n") != std::string::npos) {
      throw DataError("checkpoint: invalid key '" + key + "'");
    }
    os << key;
    for (std::size_t dim : tensor.shape()) os << " " << dim;
    os << "\n";
    write_doubles_le(os, tensor.values());
    os << "\n";
  }
  if (!os) throw DataError("checkpoint: write to '" + path + "' failed");
}

std::vector<CheckpointEntry> read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line) || line != kMagic) {
    throw DataError("checkpoint: '" + path + "' has no valid header");
  }
  if (!std::getline(is, line)) throw DataError("checkpoint: missing record count");
  std::size_t count = 0;
  try {
    count = std::stoul(line);
  } catch (const std::exception&) {
    throw DataError("checkpoint: bad record count '" + line + "'");
  }
  std::vector<CheckpointEntry> out;
  out.reserve(count);
  for (std::size_t r = 0; r < count; ++r) {
    if (!std::getline(is, line)) throw DataError("checkpoint: truncated at record " + std::to_string(r));
    std::istringstream header(line);
    CheckpointEntry entry;
    header >> entry.key;
    std::size_t dim = 0;
    while (header >> dim) {
      if (dim == 0) throw DataError("checkpoint: zero extent in record '" + entry.key + "'");
      entry.shape.push_back(dim);
    }
    if (entry.key.empty() || entry.shape.empty()) {
      throw DataError("checkpoint: malformed record header '" + line + "'");
    }
    entry.values.resize(shape_numel(entry.shape));
    read_doubles_le(is, entry.values);
    char nl = 0;
    if (!is.get(nl) || nl != '\n') {
      throw DataError("checkpoint: record '" + entry.key + "' is not newline-terminated");
    }
    out.push_back(std::move(entry));
  }
  return out;
}

void load_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& entries) {
  auto stored = read_checkpoint(path);
  std::unordered_map<std::string, CheckpointEntry*> by_key;
  for (CheckpointEntry& e : stored) {
    if (!by_key.emplace(e.key, &e).second) {
      throw DataError("checkpoint: duplicate key '" + e.key + "'");
    }
  }
  if (stored.size() != entries.size()) {
    throw DataError("checkpoint: holds " + std::to_string(stored.size()) + " records, expected " +
                    std::to_string(entries.size()));
  }
  for (const auto& [key, tensor] : entries) {
    auto it = by_key.find(key);
    if (it == by_key.end()) throw DataError("checkpoint: missing key '" + key + "'");
    const CheckpointEntry& e = *it->second;
    if (e.shape != tensor.shape()) {
      throw DataError("checkpoint: shape mismatch for '" + key + "': stored " +
                      shape_str(e.shape) + ", expected " + shape_str(tensor.shape()));
    }
    Tensor t = tensor;
    auto dst = t.values_mut();
    std::copy(e.values.begin(), e.values.end(), dst.begin());
  }
}

}  // namespace ddgcn

#include "slucl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "slucl/rng.hpp"

namespace slucl {

namespace {

constexpr char kMagic[] = "slucl-checkpoint v1";

void append_le_doubles(std::string& out, const std::vector<double>& values) {
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
}

std::vector<double> read_le_doubles(const std::string& blob, std::size_t offset, std::size_t count) {
  if (offset + count * 8 > blob.size()) {
    throw std::runtime_error("checkpoint: blob truncated");
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) {
      bits = (bits << 8) | static_cast<unsigned char>(blob[offset + i * 8 + b]);
    }
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    values[i] = v;
  }
  return values;
}

std::string manifest_text(const std::vector<NamedTensor>& params) {
  std::ostringstream manifest;
  manifest << kMagic << "\n";
  std::size_t offset = 0;
  for (const auto& [name, p] : params) {
    manifest << "param " << name << " " << p.rank();
    for (std::size_t d : p.shape()) manifest << " " << d;
    manifest << " " << offset << " " << p.numel() << "\n";
    offset += p.numel() * 8;
  }
  return manifest.str();
}

}  // namespace

void save_checkpoint(const std::string& stem, const std::vector<NamedTensor>& params) {
  const std::string manifest = manifest_text(params);
  std::string blob;
  for (const auto& [name, p] : params) append_le_doubles(blob, p.values());

  std::ofstream mf(stem + ".manifest", std::ios::binary);
  if (!mf) throw std::runtime_error("checkpoint: cannot write " + stem + ".manifest");
  mf << manifest;
  mf.close();
  std::ofstream bf(stem + ".bin", std::ios::binary);
  if (!bf) throw std::runtime_error("checkpoint: cannot write " + stem + ".bin");
  bf.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

std::vector<CheckpointEntry> load_checkpoint(const std::string& stem) {
  std::ifstream mf(stem + ".manifest", std::ios::binary);
  if (!mf) throw std::runtime_error("checkpoint: cannot read " + stem + ".manifest");
  std::string line;
  if (!std::getline(mf, line) || line != kMagic) {
    throw std::runtime_error("checkpoint: bad manifest header in " + stem);
  }

  std::ifstream bf(stem + ".bin", std::ios::binary);
  if (!bf) throw std::runtime_error("checkpoint: cannot read " + stem + ".bin");
  std::stringstream blob_stream;
  blob_stream << bf.rdbuf();
  const std::string blob = blob_stream.str();

  std::vector<CheckpointEntry> entries;
  while (std::getline(mf, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind != "param") throw std::runtime_error("checkpoint: bad manifest line: " + line);
    CheckpointEntry entry;
    std::size_t rank = 0, offset = 0, count = 0;
    ls >> entry.name >> rank;
    entry.shape.resize(rank);
    for (std::size_t i = 0; i < rank; ++i) ls >> entry.shape[i];
    ls >> offset >> count;
    if (!ls) throw std::runtime_error("checkpoint: bad manifest line: " + line);
    entry.values = read_le_doubles(blob, offset, count);
    entries.push_back(std::move(entry));
  }
  return entries;
}

void load_checkpoint_into(const std::string& stem, const std::vector<NamedTensor>& params) {
  auto entries = load_checkpoint(stem);
  if (entries.size() != params.size()) {
    throw std::runtime_error("checkpoint: parameter count mismatch for " + stem);
  }
  for (const auto& entry : entries) {
    bool found = false;
    for (const auto& [name, p] : params) {
      if (name != entry.name) continue;
      if (p.shape() != entry.shape) {
        throw std::runtime_error("checkpoint: shape mismatch for '" + entry.name + "'");
      }
      Tensor t = p;
      t.mutable_values() = entry.values;
      found = true;
      break;
    }
    if (!found) throw std::runtime_error("checkpoint: unexpected parameter '" + entry.name + "'");
  }
}

std::uint64_t parameter_hash(const std::vector<NamedTensor>& params) {
  const std::string manifest = manifest_text(params);
  std::uint64_t h = fnv1a(manifest.data(), manifest.size());
  for (const auto& [name, p] : params) {
    h = fnv1a(p.values().data(), p.values().size() * sizeof(double), h);
  }
  return h;
}

}  // namespace slucl

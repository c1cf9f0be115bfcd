#include "recore/autodiff/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "recore/common/error.hpp"

namespace recore::ad {

namespace {

constexpr const char* kMagic = "RECORE-CKPT";

template <typename U>
void append_le(std::string& blob, U v) {
  unsigned char bytes[sizeof(U)];
  std::memcpy(bytes, &v, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(U));
  blob.append(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U read_le(const char* p) {
  unsigned char bytes[sizeof(U)];
  std::memcpy(bytes, p, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(U));
  U v;
  std::memcpy(&v, bytes, sizeof(U));
  return v;
}

void check_token(const std::string& s, const char* what) {
  if (s.empty() || s.find_first_of(" \t\n\r") != std::string::npos) {
    throw ConfigError(std::string("checkpoint ") + what + " '" + s + "' must be a non-empty token without whitespace");
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ostringstream manifest;
  std::string blob;
  manifest << kMagic << "\nversion " << kCheckpointVersion << "\n";
  for (const auto& [k, v] : ckpt.meta) {
    check_token(k, "meta key");
    if (v.find('\n') != std::string::npos) throw ConfigError("checkpoint meta value for '" + k + "' contains a newline");
    manifest << "meta " << k << ' ' << v << "\n";
  }
  for (const auto& [name, a] : ckpt.tensors) {
    check_token(name, "tensor name");
    const auto offset = blob.size();
    for (float x : a.data()) append_le(blob, x);
    manifest << "tensor " << name << " f32 " << a.rank();
    for (auto e : a.shape()) manifest << ' ' << e;
    manifest << ' ' << offset << ' ' << (blob.size() - offset) << "\n";
  }
  for (const auto& [name, c] : ckpt.counters) {
    check_token(name, "counter name");
    const auto offset = blob.size();
    append_le(blob, static_cast<std::int64_t>(c));
    manifest << "counter " << name << " i64 " << offset << " 8\n";
  }
  manifest << "end\n";

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + tmp);
    const std::string m = manifest.str();
    out.write(m.data(), static_cast<std::streamsize>(m.size()));
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw std::runtime_error("failed writing checkpoint: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw ConfigError("not a checkpoint file: " + path.string());
  if (!std::getline(in, line) || line != "version " + std::to_string(kCheckpointVersion)) {
    throw ConfigError("unsupported checkpoint version line '" + line + "' in " + path.string());
  }

  struct Pending {
    std::string name;
    Shape shape;
    bool is_counter;
    std::uint64_t offset, nbytes;
  };
  Checkpoint ckpt;
  std::vector<Pending> pending;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ckpt.meta[key] = value;
    } else if (kind == "tensor") {
      Pending p{};
      std::string dtype;
      int rank = 0;
      ls >> p.name >> dtype >> rank;
      if (dtype != "f32") throw ConfigError("unsupported tensor dtype '" + dtype + "' for " + p.name);
      for (int i = 0; i < rank; ++i) {
        std::int64_t e;
        ls >> e;
        p.shape.push_back(e);
      }
      ls >> p.offset >> p.nbytes;
      if (!ls) throw ConfigError("malformed manifest line: " + line);
      p.is_counter = false;
      pending.push_back(std::move(p));
    } else if (kind == "counter") {
      Pending p{};
      std::string dtype;
      ls >> p.name >> dtype >> p.offset >> p.nbytes;
      if (!ls || dtype != "i64" || p.nbytes != 8) throw ConfigError("malformed manifest line: " + line);
      p.is_counter = true;
      pending.push_back(std::move(p));
    } else {
      throw ConfigError("unknown manifest entry: " + line);
    }
  }
  if (!ended) throw ConfigError("checkpoint manifest not terminated: " + path.string());

  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  for (const auto& p : pending) {
    if (p.offset + p.nbytes > blob.size()) throw ConfigError("checkpoint truncated at entry " + p.name);
    const char* base = blob.data() + p.offset;
    if (p.is_counter) {
      ckpt.counters[p.name] = read_le<std::int64_t>(base);
      continue;
    }
    const auto n = numel(p.shape);
    if (static_cast<std::uint64_t>(n) * sizeof(float) != p.nbytes) {
      throw ConfigError("byte count does not match shape for " + p.name);
    }
    std::vector<float> data(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) data[static_cast<std::size_t>(i)] = read_le<float>(base + i * 4);
    ckpt.tensors[p.name] = Array(p.shape, std::move(data));
  }
  return ckpt;
}

}  // namespace recore::ad

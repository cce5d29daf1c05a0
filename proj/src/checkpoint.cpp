#include "lieflow/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "lieflow/errors.hpp"

namespace lieflow {

namespace {

constexpr char kMagic[8] = {'L', 'I', 'E', 'F', 'L', 'O', 'W', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t len) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointData& data) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 8);
  put_u32(out, kCheckpointVersion);

  const std::string meta = data.meta.dump();
  put_u64(out, meta.size());
  out.insert(out.end(), meta.begin(), meta.end());

  put_u32(out, static_cast<std::uint32_t>(data.tensors.size()));
  for (const auto& [name, mat] : data.tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(0);  // dtype tag: f64
    put_u32(out, static_cast<std::uint32_t>(mat.rows()));
    put_u32(out, static_cast<std::uint32_t>(mat.cols()));
    const std::size_t bytes = static_cast<std::size_t>(mat.size()) * sizeof(double);
    const std::size_t at = out.size();
    out.resize(at + bytes);
    std::memcpy(out.data() + at, mat.data(), bytes);
  }
  put_u64(out, fnv1a(out.data(), out.size()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoFailure("checkpoint: cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoFailure("checkpoint: short write to '" + path + "'");
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoFailure("checkpoint: cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());

  if (bytes.size() < 8 + 4 + 8 + 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw ChecksumError("checkpoint: not a checkpoint file");
  }
  const std::uint64_t stored = get_u64(bytes.data() + bytes.size() - 8);
  if (fnv1a(bytes.data(), bytes.size() - 8) != stored) {
    throw ChecksumError("checkpoint: checksum mismatch (truncated or corrupted file)");
  }

  std::size_t pos = 8;
  const std::uint32_t version = get_u32(&bytes[pos]);
  pos += 4;
  if (version != kCheckpointVersion) {
    throw VersionMismatch("checkpoint: format version " + std::to_string(version) +
                          " is not supported");
  }

  CheckpointData data;
  const std::uint64_t meta_len = get_u64(&bytes[pos]);
  pos += 8;
  data.meta = nlohmann::json::parse(bytes.begin() + pos, bytes.begin() + pos + meta_len);
  pos += meta_len;

  const std::uint32_t count = get_u32(&bytes[pos]);
  pos += 4;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32(&bytes[pos]);
    pos += 4;
    std::string name(bytes.begin() + pos, bytes.begin() + pos + name_len);
    pos += name_len;
    const std::uint8_t dtype = bytes[pos++];
    if (dtype != 0) throw ChecksumError("checkpoint: unknown dtype tag");
    const std::uint32_t rows = get_u32(&bytes[pos]);
    pos += 4;
    const std::uint32_t cols = get_u32(&bytes[pos]);
    pos += 4;
    Eigen::MatrixXd mat(rows, cols);
    std::memcpy(mat.data(), &bytes[pos], static_cast<std::size_t>(mat.size()) * sizeof(double));
    pos += static_cast<std::size_t>(mat.size()) * sizeof(double);
    data.tensors.emplace_back(std::move(name), std::move(mat));
  }
  return data;
}

}  // namespace lieflow

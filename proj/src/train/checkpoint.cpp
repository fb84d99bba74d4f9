#include "deblur/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace deblur {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void append_bytes(std::vector<std::uint8_t>& out, const void* src, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(src);
  out.insert(out.end(), p, p + n);
}

template <typename T>
void append_value(std::vector<std::uint8_t>& out, T value) {
  append_bytes(out, &value, sizeof(T));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::string origin)
      : bytes_(bytes), origin_(std::move(origin)) {}

  template <typename T>
  T read() {
    T value;
    take(&value, sizeof(T));
    return value;
  }

  void take(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw std::runtime_error(origin_ + ": unexpected end of file at offset " +
                               std::to_string(pos_) + " (need " + std::to_string(n) +
                               " more bytes, have " + std::to_string(bytes_.size() - pos_) + ")");
    }
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::string& origin() const { return origin_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

void TensorTable::put(const std::string& name, const Shape& shape, std::vector<float> values,
                      std::uint8_t rank) {
  if (static_cast<std::int64_t>(values.size()) != shape.numel()) {
    throw std::invalid_argument("TensorTable::put(" + name + "): " +
                                std::to_string(values.size()) + " values for shape " +
                                shape.str());
  }
  entries[name] = TensorEntry{shape, rank, std::move(values)};
}

void TensorTable::put_vector(const std::string& name, std::vector<float> values) {
  const auto n = static_cast<std::int64_t>(values.size());
  put(name, Shape{n, 1, 1, 1}, std::move(values), 1);
}

void TensorTable::put_scalar(const std::string& name, float value) {
  put(name, Shape{1, 1, 1, 1}, {value}, 1);
}

const TensorEntry& TensorTable::at(const std::string& name) const {
  auto it = entries.find(name);
  if (it == entries.end()) {
    throw std::runtime_error("tensor table: missing entry " + name);
  }
  return it->second;
}

std::vector<std::uint8_t> serialize_tensor_table(const TensorTable& table) {
  std::vector<std::uint8_t> out;
  append_bytes(out, "SLCG", 4);
  append_value<std::uint32_t>(out, kCheckpointVersion);
  append_value<std::uint64_t>(out, table.entries.size());
  for (const auto& [name, entry] : table.entries) {
    if (name.size() > 0xffff) {
      throw std::invalid_argument("tensor table: name too long: " + name);
    }
    append_value<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    append_bytes(out, name.data(), name.size());
    append_value<std::uint8_t>(out, entry.rank);
    const std::int64_t dims[4] = {entry.shape.n, entry.shape.c, entry.shape.h, entry.shape.w};
    for (std::uint8_t d = 0; d < entry.rank; ++d) {
      append_value<std::uint64_t>(out, static_cast<std::uint64_t>(dims[d]));
    }
    append_bytes(out, entry.values.data(), entry.values.size() * sizeof(float));
  }
  return out;
}

TensorTable deserialize_tensor_table(const std::vector<std::uint8_t>& bytes,
                                     const std::string& origin) {
  Reader r(bytes, origin);
  char magic[4];
  r.take(magic, 4);
  if (std::memcmp(magic, "SLCG", 4) != 0) {
    throw std::runtime_error(origin + ": bad magic at offset 0");
  }
  const auto version = r.read<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw std::runtime_error(origin + ": unsupported format version " +
                             std::to_string(version) + " (expected " +
                             std::to_string(kCheckpointVersion) + ") at offset 4");
  }
  const auto count = r.read<std::uint64_t>();
  TensorTable table;
  for (std::uint64_t t = 0; t < count; ++t) {
    const auto name_len = r.read<std::uint16_t>();
    std::string name(name_len, '\0');
    r.take(name.data(), name_len);
    const auto rank = r.read<std::uint8_t>();
    if (rank < 1 || rank > 4) {
      throw std::runtime_error(origin + ": invalid rank " + std::to_string(rank) +
                               " for tensor " + name + " at offset " + std::to_string(r.pos()));
    }
    std::int64_t dims[4] = {1, 1, 1, 1};
    for (std::uint8_t d = 0; d < rank; ++d) {
      dims[d] = static_cast<std::int64_t>(r.read<std::uint64_t>());
      if (dims[d] < 1) {
        throw std::runtime_error(origin + ": invalid dimension for tensor " + name);
      }
    }
    TensorEntry entry;
    entry.rank = rank;
    entry.shape = Shape{dims[0], dims[1], dims[2], dims[3]};
    const auto numel = static_cast<std::size_t>(entry.shape.numel());
    entry.values.resize(numel);
    r.take(entry.values.data(), numel * sizeof(float));
    table.entries.emplace(std::move(name), std::move(entry));
  }
  if (r.remaining() != 0) {
    throw std::runtime_error(origin + ": " + std::to_string(r.remaining()) +
                             " trailing bytes at offset " + std::to_string(r.pos()));
  }
  return table;
}

void write_tensor_table(const std::string& path, const TensorTable& table) {
  std::vector<std::uint8_t> bytes = serialize_tensor_table(table);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

TensorTable read_tensor_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("cannot open " + path);
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw std::runtime_error("read failed for " + path);
  return deserialize_tensor_table(bytes, path);
}

std::vector<float> pack_doubles(const std::vector<double>& values) {
  std::vector<float> packed(values.size() * 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    packed[2 * i] = std::bit_cast<float>(static_cast<std::uint32_t>(bits & 0xffffffffu));
    packed[2 * i + 1] = std::bit_cast<float>(static_cast<std::uint32_t>(bits >> 32));
  }
  return packed;
}

std::vector<double> unpack_doubles(const std::vector<float>& packed) {
  if (packed.size() % 2 != 0) {
    throw std::invalid_argument("unpack_doubles: odd-length packed vector");
  }
  std::vector<double> values(packed.size() / 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto lo = std::bit_cast<std::uint32_t>(packed[2 * i]);
    const auto hi = std::bit_cast<std::uint32_t>(packed[2 * i + 1]);
    values[i] = std::bit_cast<double>((static_cast<std::uint64_t>(hi) << 32) | lo);
  }
  return values;
}

std::vector<float> pack_u64s(const std::vector<std::uint64_t>& values) {
  std::vector<float> packed(values.size() * 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    packed[2 * i] = std::bit_cast<float>(static_cast<std::uint32_t>(values[i] & 0xffffffffu));
    packed[2 * i + 1] = std::bit_cast<float>(static_cast<std::uint32_t>(values[i] >> 32));
  }
  return packed;
}

std::vector<std::uint64_t> unpack_u64s(const std::vector<float>& packed) {
  if (packed.size() % 2 != 0) {
    throw std::invalid_argument("unpack_u64s: odd-length packed vector");
  }
  std::vector<std::uint64_t> values(packed.size() / 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto lo = std::bit_cast<std::uint32_t>(packed[2 * i]);
    const auto hi = std::bit_cast<std::uint32_t>(packed[2 * i + 1]);
    values[i] = (static_cast<std::uint64_t>(hi) << 32) | lo;
  }
  return values;
}

}  // namespace deblur

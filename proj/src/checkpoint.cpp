#include "iconnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace iconnet {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_bytes(std::vector<std::uint8_t>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("checkpoint truncated while reading ") + what);
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  std::vector<std::uint8_t> out = {'I', 'C', 'O', 'N'};
  put_u32(out, kCheckpointVersion);
  const Json meta{{"model", to_json(ck.model)},
                  {"class_names", ck.class_names},
                  {"precision", std::string(to_string(ck.precision))}};
  put_bytes(out, meta.dump());
  put_u32(out, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& [name, t] : ck.tensors) {
    put_bytes(out, name);
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (std::uint64_t d : t.dims) put_u64(out, d);
    for (double v : t.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "ICON", 4) != 0) {
    throw FormatError("not a checkpoint: bad magic bytes (format version unknown)");
  }
  const std::vector<std::uint8_t> body(bytes.begin() + 4, bytes.end());
  Reader in(body);
  const std::uint32_t version = in.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint format version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck;
  try {
    const Json meta = Json::parse(in.str("metadata"));
    ck.model = model_config_from_json(meta.at("model"), "$.model");
    ck.class_names = meta.at("class_names").get<std::vector<std::string>>();
    ck.precision = parse_precision(meta.at("precision").get<std::string>());
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("checkpoint metadata is invalid: ") + e.what());
  }
  const std::uint32_t count = in.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor t;
    const std::string name = in.str("tensor name");
    const std::uint32_t ndim = in.u32("tensor rank");
    std::uint64_t size = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      t.dims.push_back(in.u64("tensor shape"));
      size *= t.dims.back();
    }
    in.need(size * 8, "tensor data");
    t.data.resize(size);
    for (auto& v : t.data) v = std::bit_cast<double>(in.u64("tensor data"));
    ck.tensors[name] = std::move(t);
  }
  if (!in.done()) throw FormatError("checkpoint has trailing bytes");
  return ck;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw FormatError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

}  // namespace iconnet

#include "deeppe/nn/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "deeppe/error.hpp"

namespace dpe::nn {

namespace {

static_assert(std::endian::native == std::endian::little,
              "weight files are written in host byte order");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string(std::size_t n) {
    need(n, "parameter name");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::kModelFormat,
                  std::string("weight file truncated while reading ") + what);
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_model(const ParameterStore& params) {
  std::string out = "DPE";
  out.push_back(kModelFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params.all()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    const auto& shape = p.value().shape();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (auto e : shape) put<std::uint64_t>(out, e);
    for (double v : p.value().data()) put<float>(out, static_cast<float>(v));
  }
  return out;
}

NamedTensors decode_model(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 3, "DPE") != 0) {
    throw Error(ErrorCode::kModelFormat, "not a weight file (missing DPE magic)");
  }
  if (bytes[3] != kModelFormatVersion) {
    throw Error(ErrorCode::kModelFormat,
                std::string("weight file format version ") + bytes[3] +
                    " is not supported (expected version " + kModelFormatVersion + ")");
  }
  Reader r(bytes);
  r.get<std::uint32_t>("magic");
  const auto count = r.get<std::uint32_t>("parameter count");
  NamedTensors out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>("name length");
    std::string name = r.get_string(len);
    const auto rank = r.get<std::uint32_t>("rank");
    std::vector<std::size_t> shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(r.get<std::uint64_t>("extent"));
    Tensor t(shape);
    for (double& v : t.data()) v = static_cast<double>(r.get<float>("values"));
    out.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) {
    throw Error(ErrorCode::kModelFormat, "trailing bytes after the last parameter");
  }
  return out;
}

void save_model(const std::filesystem::path& path, const ParameterStore& params) {
  const std::string bytes = encode_model(params);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error(ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot rename to " + path.string() + ": " + ec.message());
}

NamedTensors load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_model(ss.str());
}

void round_to_float(ParameterStore& params) {
  for (auto& p : params.all()) {
    for (double& v : p.mutable_value().data()) v = static_cast<double>(static_cast<float>(v));
  }
}

}  // namespace dpe::nn

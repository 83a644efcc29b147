#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

#include "dosmct/denoiser.hpp"
#include "dosmct/hash.hpp"

namespace dosmct {

namespace {

constexpr char kMagic[8] = {'D', 'O', 'S', 'M', 'C', 'K', 'P', 'T'};

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& buf) : buf_(buf) {}
  std::uint64_t u64() { return uint(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  const unsigned char* take(std::size_t n) {
    if (n > buf_.size() - pos_) throw std::runtime_error("checkpoint: truncated file");
    const unsigned char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::uint64_t uint(int bytes) {
    const unsigned char* p = take(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  const std::vector<unsigned char>& buf_;
  std::size_t pos_ = 0;
};

DenoiserArch arch_from_descriptor(const nlohmann::json& d) {
  if (d.value("type", "") != "conv_denoiser")
    throw std::runtime_error("checkpoint: unknown model type");
  DenoiserArch arch;
  arch.hidden_channels = d.at("hidden_channels").get<int>();
  arch.dilations = d.at("dilations").get<std::vector<int>>();
  arch.sigma_data = d.at("sigma_data").get<double>();
  return arch;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const DenoiserModel& model,
                     const nlohmann::json& extra) {
  nlohmann::json desc = model.descriptor();
  if (!extra.is_null() && !extra.empty()) desc["extra"] = extra;
  const std::string text = desc.dump();

  std::vector<unsigned char> buf(std::begin(kMagic), std::end(kMagic));
  put_u32(buf, kCheckpointVersion);
  put_u64(buf, text.size());
  buf.insert(buf.end(), text.begin(), text.end());
  const auto params = model.parameters();
  put_u64(buf, params.size());
  for (float p : params) put_u32(buf, std::bit_cast<std::uint32_t>(p));
  put_u64(buf, fnv1a64(buf));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

DenoiserModel load_checkpoint(const std::filesystem::path& path, nlohmann::json* descriptor) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                       std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(kMagic) + 8 || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  const std::size_t body = buf.size() - 8;
  Reader tail(buf);
  tail.take(body);
  if (tail.u64() != fnv1a64(std::span<const unsigned char>(buf.data(), body)))
    throw std::runtime_error("checkpoint: integrity hash mismatch in " + path.string());

  Reader r(buf);
  r.take(sizeof(kMagic));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const std::uint64_t len = r.u64();
  const unsigned char* text = r.take(len);
  const nlohmann::json desc = nlohmann::json::parse(text, text + len);
  DenoiserModel model(arch_from_descriptor(desc));
  const std::uint64_t count = r.u64();
  if (count != model.parameter_count())
    throw std::runtime_error("checkpoint: parameter count does not match the architecture");
  auto params = model.parameters();
  const unsigned char* raw = r.take(count * 4);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(raw[4 * i + b]) << (8 * b);
    params[i] = std::bit_cast<float>(bits);
  }
  if (descriptor) *descriptor = desc;
  return model;
}

}  // namespace dosmct

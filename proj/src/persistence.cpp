#include "logonet/persistence.hpp"

#include <bit>
#include <cstring>

#include "logonet/error.hpp"
#include "logonet/image.hpp"

namespace logonet {
namespace fs = std::filesystem;

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void text(std::string_view s) {
    u32(checked(s.size(), "string length"));
    raw(s);
  }
  void floats(std::span<const float> values) {
    for (float f : values) u32(std::bit_cast<std::uint32_t>(f));
  }
  static std::uint32_t checked(std::size_t n, const char* what) {
    if (n > 0xFFFFFFFFu) throw FormatError(std::string(what) + " exceeds 32 bits");
    return static_cast<std::uint32_t>(n);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, const char* kind) : bytes_(bytes), kind_(kind) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string raw(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string text(const char* what) { return raw(u32(what), what); }
  void floats(std::span<float> out, const char* what) {
    need(out.size() * 4, what);
    for (auto& f : out) {
      std::uint32_t v = 0;
      for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
      f = std::bit_cast<float>(v);
      pos_ += 4;
    }
  }
  void magic(std::string_view expected) {
    const std::size_t at = pos_;
    if (raw(expected.size(), "magic") != expected)
      fail(at, "bad magic, expected '" + std::string(expected) + "'");
  }
  void finish() {
    if (pos_ != bytes_.size())
      fail(pos_, std::to_string(bytes_.size() - pos_) + " trailing bytes");
  }
  std::size_t offset() const { return pos_; }
  [[noreturn]] void fail(std::size_t at, const std::string& message) const {
    throw FormatError(std::string(kind_) + " at offset " + std::to_string(at) + ": " + message);
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      fail(pos_, std::string("truncated while reading ") + what + " (" + std::to_string(n) +
                     " bytes needed, " + std::to_string(bytes_.size() - pos_) + " left)");
  }

  std::span<const std::uint8_t> bytes_;
  const char* kind_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const LogoNetModel& model) {
  Writer w;
  w.raw("LGN1");
  w.u32(kCheckpointVersion);
  w.text(model.config().to_text());
  const auto params = model.parameters();
  w.u32(Writer::checked(params.size(), "record count"));
  for (const auto& p : params) {
    w.text(p.name);
    w.u32(Writer::checked(p.tensor.rank(), "ndim"));
    for (std::size_t d : p.tensor.shape()) w.u32(Writer::checked(d, "dimension"));
    w.floats(p.tensor.data());
  }
  return w.take();
}

LogoNetModel deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "checkpoint");
  r.magic("LGN1");
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    r.fail(version_at, "unsupported version " + std::to_string(version));
  const std::size_t config_at = r.offset();
  const std::string config_text = r.text("config text");
  LogoNetConfig config;
  try {
    config = LogoNetConfig::from_text(config_text);
    config.validate();
  } catch (const ConfigError& e) {
    r.fail(config_at, std::string("invalid config: ") + e.what());
  }
  LogoNetModel model(config);
  const auto params = model.parameters();
  const std::size_t count_at = r.offset();
  const std::uint32_t count = r.u32("record count");
  if (count != params.size())
    r.fail(count_at, "config implies " + std::to_string(params.size()) + " records, file has " +
                         std::to_string(count));
  for (const auto& p : params) {
    const std::size_t record_at = r.offset();
    const std::string name = r.text("record name");
    if (name != p.name) r.fail(record_at, "expected record '" + p.name + "', found '" + name + "'");
    const std::uint32_t ndim = r.u32("ndim");
    Shape shape;
    for (std::uint32_t i = 0; i < ndim; ++i) shape.push_back(r.u32("dimension"));
    if (shape != p.tensor.shape())
      r.fail(record_at, "record '" + name + "' has shape " + shape_string(shape) +
                            ", config implies " + shape_string(p.tensor.shape()));
    r.floats(p.tensor.data(), "record values");
  }
  r.finish();
  return model;
}

void save_checkpoint(const LogoNetModel& model, const fs::path& path) {
  write_file_atomic(path, serialize_checkpoint(model));
}

LogoNetModel load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw Error("missing checkpoint file: " + path.string());
  try {
    return deserialize_checkpoint(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> serialize_gallery(const Gallery& gallery) {
  gallery.check(false);
  Writer w;
  w.raw("LGG1");
  w.u32(kGalleryVersion);
  w.text(gallery.fingerprint);
  w.u32(Writer::checked(gallery.size(), "gallery size"));
  w.u32(Writer::checked(gallery.dim(), "embedding dimension"));
  for (const auto& id : gallery.instance_ids) w.text(id);
  w.floats(gallery.embeddings.data());
  return w.take();
}

Gallery deserialize_gallery(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, "gallery");
  r.magic("LGG1");
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kGalleryVersion) r.fail(version_at, "unsupported version " + std::to_string(version));
  Gallery gallery;
  gallery.fingerprint = r.text("fingerprint");
  const std::size_t size_at = r.offset();
  const std::uint32_t g = r.u32("gallery size");
  const std::uint32_t d = r.u32("embedding dimension");
  if (g == 0 || d == 0) r.fail(size_at, "empty gallery");
  for (std::uint32_t i = 0; i < g; ++i) gallery.instance_ids.push_back(r.text("instance id"));
  gallery.embeddings = Tensor<float>({g, d});
  r.floats(gallery.embeddings.data(), "embeddings");
  r.finish();
  gallery.check(false);
  return gallery;
}

void save_gallery(const Gallery& gallery, const fs::path& path) {
  write_file_atomic(path, serialize_gallery(gallery));
}

Gallery load_gallery(const fs::path& path, const std::optional<std::string>& expected_fingerprint,
                     const WarningSink& warn) {
  if (!fs::exists(path)) throw Error("missing gallery file: " + path.string());
  Gallery gallery;
  try {
    gallery = deserialize_gallery(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (expected_fingerprint && *expected_fingerprint != gallery.fingerprint && warn) {
    warn("gallery " + path.string() + " was built by model " + gallery.fingerprint +
         ", current model is " + *expected_fingerprint);
  }
  return gallery;
}

}  // namespace logonet

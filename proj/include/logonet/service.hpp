#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "logonet/model.hpp"
#include "logonet/retrieval.hpp"

namespace logonet {

/// Everything one request needs. Never mutated after construction; a
/// reload builds a new snapshot and swaps the pointer.
struct ServiceSnapshot {
  LogoNetModel model;
  Gallery gallery;
  std::string model_fingerprint;
  std::filesystem::path dataset_root;
  std::unordered_map<std::string, std::filesystem::path> thumbnails;
  bool fingerprint_mismatch = false;
};

/// Loads a checkpoint and gallery. Thumbnails come from the dataset
/// manifest when present, else root/images/<id>.png. A gallery built by a
/// different model is accepted and reported through `warn`.
std::shared_ptr<const ServiceSnapshot> load_snapshot(const std::filesystem::path& checkpoint,
                                                     const std::filesystem::path& gallery,
                                                     const std::filesystem::path& dataset_root,
                                                     const std::function<void(const std::string&)>& warn = {});

/// Ranked top-k for one encoded image, as the JSON body served by /query:
/// {"results":[{"instance_id","distance","thumbnail_url"}]}, distances
/// rounded to 4 decimals. Throws Error for an undecodable image and
/// ConfigError for k outside [1, G].
std::string query_json(const ServiceSnapshot& snapshot, std::span<const std::uint8_t> image,
                       std::size_t k);

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Request handling independent of the HTTP transport.
class QueryService {
 public:
  explicit QueryService(std::size_t log_capacity = 1000);

  void install(std::shared_ptr<const ServiceSnapshot> snapshot);
  std::shared_ptr<const ServiceSnapshot> snapshot() const;
  /// Loads new files and swaps them in; the old snapshot stays on failure.
  void reload(const std::filesystem::path& checkpoint, const std::filesystem::path& gallery,
              const std::filesystem::path& dataset_root);

  HttpResponse health() const;
  /// `k` is the raw query parameter, absent meaning min(10, G).
  HttpResponse query(std::span<const std::uint8_t> image, std::optional<std::string_view> k) const;
  /// Accepts {"image": "<base64 PNG>", "k": n}; a data: URL prefix is allowed.
  HttpResponse query_json_body(std::string_view body, std::optional<std::string_view> k) const;
  HttpResponse thumbnail(std::string_view instance_id) const;
  /// {"checkpoint": path, "gallery": path, "data": path}; data defaults to
  /// the current dataset root.
  HttpResponse admin_reload(std::string_view body);

  void log(const std::string& line) const;
  std::vector<std::string> log_lines() const;
  void set_log_sink(std::function<void(const std::string&)> sink);

 private:
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const ServiceSnapshot> snapshot_;
  mutable std::mutex log_mutex_;
  mutable std::deque<std::string> log_;
  std::size_t log_capacity_;
  std::function<void(const std::string&)> sink_;
};

class HttpServer {
 public:
  explicit HttpServer(QueryService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds (port 0 picks a free port) and returns the bound port. Throws
  /// Error when the port is unavailable.
  int bind(const std::string& host, int port);
  /// Serves until stop(); blocks the caller.
  void listen();
  /// bind() then listen() on a background thread.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<std::uint8_t> decode_base64(std::string_view text);

}  // namespace logonet

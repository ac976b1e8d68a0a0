#include "logonet/service.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <thread>
#include <charconv>

// The library default of 5 pending connections drops bursts of concurrent
// clients before the accept loop can drain them.
#define CPPHTTPLIB_LISTEN_BACKLOG 128
#include <httplib.h>
#include <json.hpp>

#include "logonet/dataset.hpp"
#include "logonet/error.hpp"
#include "logonet/image.hpp"
#include "logonet/persistence.hpp"

namespace logonet {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

HttpResponse json_response(int status, const json& body) {
  return {status, "application/json", body.dump()};
}

HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, json{{"error", message}});
}

std::string url_component(std::string_view text) {
  static constexpr char hex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 0xF];
    }
  }
  return out;
}

std::string content_type_for(const fs::path& path) {
  std::string ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

}  // namespace

std::vector<std::uint8_t> decode_base64(std::string_view text) {
  std::string clean;
  clean.reserve(text.size());
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) clean += c;
  if (clean.size() % 4 != 0) throw Error("invalid base64: length is not a multiple of 4");
  std::vector<std::uint8_t> out(clean.size() / 4 * 3);
  if (clean.empty()) return out;
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                static_cast<int>(clean.size()));
  if (n < 0) throw Error("invalid base64 payload");
  std::size_t padding = 0;
  if (clean.back() == '=') ++padding;
  if (clean.size() >= 2 && clean[clean.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

std::shared_ptr<const ServiceSnapshot> load_snapshot(const fs::path& checkpoint,
                                                     const fs::path& gallery_path,
                                                     const fs::path& dataset_root,
                                                     const std::function<void(const std::string&)>& warn) {
  auto snapshot = std::make_shared<ServiceSnapshot>(ServiceSnapshot{
      load_checkpoint(checkpoint), Gallery{}, std::string(), dataset_root, {}, false});
  snapshot->model_fingerprint = fingerprint(snapshot->model);
  snapshot->gallery = load_gallery(gallery_path, snapshot->model_fingerprint, warn);
  snapshot->fingerprint_mismatch = snapshot->gallery.fingerprint != snapshot->model_fingerprint;
  if (snapshot->gallery.dim() != snapshot->model.config().embed_dim)
    throw IntegrityError("gallery dimension " + std::to_string(snapshot->gallery.dim()) +
                         " does not match model embed_dim " +
                         std::to_string(snapshot->model.config().embed_dim));
  if (!dataset_root.empty() && fs::exists(dataset_root / "manifest.csv")) {
    const auto manifest = load_manifest(dataset_root);
    for (const auto& logo : manifest.logos)
      snapshot->thumbnails.emplace(logo.instance_id, dataset_root / logo.image_path);
  }
  for (const auto& id : snapshot->gallery.instance_ids)
    snapshot->thumbnails.try_emplace(id, dataset_root / "images" / (id + ".png"));
  return snapshot;
}

std::string query_json(const ServiceSnapshot& snapshot, std::span<const std::uint8_t> image,
                       std::size_t k) {
  const auto& gallery = snapshot.gallery;
  if (k < 1 || k > gallery.size())
    throw ConfigError("k must be in [1, " + std::to_string(gallery.size()) + "], got " +
                      std::to_string(k));
  const auto& cfg = snapshot.model.config();
  const auto tensor = decode_image_bytes(image, cfg.input_channels, cfg.input_size);
  const auto embedding = embed_images(snapshot.model, {tensor});
  const auto ranked = rank(gallery, embedding.data());
  json results = json::array();
  for (std::size_t i = 0; i < k; ++i) {
    const auto& e = ranked.entries[i];
    results.push_back({{"instance_id", e.instance_id},
                       {"distance", std::round(e.distance * 1e4) / 1e4},
                       {"thumbnail_url", "/thumbnail/" + url_component(e.instance_id)}});
  }
  return json{{"results", results}}.dump();
}

QueryService::QueryService(std::size_t log_capacity) : log_capacity_(log_capacity) {}

void QueryService::install(std::shared_ptr<const ServiceSnapshot> snapshot) {
  std::lock_guard lock(snapshot_mutex_);
  snapshot_ = std::move(snapshot);
}

std::shared_ptr<const ServiceSnapshot> QueryService::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

void QueryService::reload(const fs::path& checkpoint, const fs::path& gallery,
                          const fs::path& dataset_root) {
  install(load_snapshot(checkpoint, gallery, dataset_root,
                        [this](const std::string& w) { log("warning: " + w); }));
  log("loaded checkpoint " + checkpoint.string() + " and gallery " + gallery.string());
}

HttpResponse QueryService::health() const {
  const auto snap = snapshot();
  if (!snap)
    return json_response(503, json{{"status", "unavailable"}, {"model_fingerprint", nullptr},
                                   {"gallery_size", 0}});
  return json_response(200, json{{"status", "ok"},
                                 {"model_fingerprint", snap->model_fingerprint},
                                 {"gallery_size", snap->gallery.size()}});
}

HttpResponse QueryService::query(std::span<const std::uint8_t> image,
                                 std::optional<std::string_view> k_text) const {
  const auto snap = snapshot();
  if (!snap) return error_response(503, "no model or gallery loaded");
  std::size_t k = std::min<std::size_t>(10, snap->gallery.size());
  if (k_text) {
    const std::string_view t = *k_text;
    std::size_t parsed = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), parsed);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
      return error_response(400, "k must be a positive integer, got '" + std::string(t) + "'");
    k = parsed;
  }
  if (k < 1 || k > snap->gallery.size())
    return error_response(400, "k must be in [1, " + std::to_string(snap->gallery.size()) +
                                   "], got " + std::to_string(k));
  if (snap->fingerprint_mismatch)
    log("warning: gallery fingerprint " + snap->gallery.fingerprint + " differs from model " +
        snap->model_fingerprint);
  try {
    return {200, "application/json", query_json(*snap, image, k)};
  } catch (const Error& e) {
    return error_response(400, e.what());
  }
}

HttpResponse QueryService::query_json_body(std::string_view body,
                                           std::optional<std::string_view> k_text) const {
  const json request = json::parse(body, nullptr, false);
  if (request.is_discarded() || !request.is_object())
    return error_response(400, "request body is not a JSON object");
  if (!request.contains("image") || !request["image"].is_string())
    return error_response(400, "JSON body needs a base64 'image' string");
  std::string k_storage;
  if (!k_text && request.contains("k")) {
    const auto& k = request["k"];
    k_storage = k.is_string() ? k.get<std::string>() : k.dump();
    k_text = k_storage;
  }
  std::string_view encoded = request["image"].get_ref<const std::string&>();
  if (encoded.substr(0, 5) == "data:") {
    const auto comma = encoded.find(',');
    if (comma == std::string_view::npos) return error_response(400, "malformed data URL");
    encoded.remove_prefix(comma + 1);
  }
  std::vector<std::uint8_t> bytes;
  try {
    bytes = decode_base64(encoded);
  } catch (const Error& e) {
    return error_response(400, e.what());
  }
  return query(bytes, k_text);
}

HttpResponse QueryService::thumbnail(std::string_view instance_id) const {
  const auto snap = snapshot();
  if (!snap) return error_response(503, "no model or gallery loaded");
  const auto it = snap->thumbnails.find(std::string(instance_id));
  if (it == snap->thumbnails.end() || !snap->gallery.index_of(instance_id))
    return error_response(404, "unknown instance_id '" + std::string(instance_id) + "'");
  try {
    const auto bytes = read_file_bytes(it->second);
    return {200, content_type_for(it->second), std::string(bytes.begin(), bytes.end())};
  } catch (const Error& e) {
    return error_response(404, e.what());
  }
}

HttpResponse QueryService::admin_reload(std::string_view body) {
  const json request = json::parse(body, nullptr, false);
  if (request.is_discarded() || !request.is_object())
    return error_response(400, "request body is not a JSON object");
  auto path_field = [&](const char* key) -> std::optional<std::string> {
    if (request.contains(key) && request[key].is_string()) return request[key].get<std::string>();
    return std::nullopt;
  };
  const auto checkpoint = path_field("checkpoint");
  const auto gallery = path_field("gallery");
  if (!checkpoint || !gallery) return error_response(400, "reload needs 'checkpoint' and 'gallery' paths");
  fs::path root;
  if (auto data = path_field("data")) {
    root = *data;
  } else if (auto current = snapshot()) {
    root = current->dataset_root;
  }
  try {
    reload(*checkpoint, *gallery, root);
  } catch (const Error& e) {
    log(std::string("reload failed: ") + e.what());
    return error_response(400, e.what());
  }
  return health();
}

void QueryService::log(const std::string& line) const {
  std::function<void(const std::string&)> sink;
  {
    std::lock_guard lock(log_mutex_);
    log_.push_back(line);
    while (log_.size() > log_capacity_) log_.pop_front();
    sink = sink_;
  }
  if (sink) sink(line);
}

std::vector<std::string> QueryService::log_lines() const {
  std::lock_guard lock(log_mutex_);
  return {log_.begin(), log_.end()};
}

void QueryService::set_log_sink(std::function<void(const std::string&)> sink) {
  std::lock_guard lock(log_mutex_);
  sink_ = std::move(sink);
}

struct HttpServer::Impl {
  QueryService& service;
  httplib::Server server;
  std::thread thread;
};

namespace {

void send(httplib::Response& res, const HttpResponse& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

std::optional<std::string> k_param(const httplib::Request& req) {
  if (!req.has_param("k")) return std::nullopt;
  return req.get_param_value("k");
}

}  // namespace

HttpServer::HttpServer(QueryService& service) : impl_(new Impl{service, {}, {}}) {
  auto& svr = impl_->server;
  QueryService& svc = impl_->service;
  svr.Get("/health", [&svc](const httplib::Request&, httplib::Response& res) { send(res, svc.health()); });
  svr.Post("/query", [&svc](const httplib::Request& req, httplib::Response& res) {
    const auto k = k_param(req);
    if (req.is_multipart_form_data()) {
      if (req.files.empty()) return send(res, error_response(400, "multipart body has no file part"));
      const auto& part = req.has_file("image") ? req.get_file_value("image") : req.files.begin()->second;
      const auto* data = reinterpret_cast<const std::uint8_t*>(part.content.data());
      return send(res, svc.query(std::span(data, part.content.size()), k));
    }
    const std::string type = req.get_header_value("Content-Type");
    if (type.rfind("application/json", 0) == 0) return send(res, svc.query_json_body(req.body, k));
    const auto* data = reinterpret_cast<const std::uint8_t*>(req.body.data());
    send(res, svc.query(std::span(data, req.body.size()), k));
  });
  svr.Get(R"(/thumbnail/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.thumbnail(req.matches[1].str()));
  });
  svr.Post("/admin/reload", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.admin_reload(req.body));
  });
  svr.set_logger([&svc](const httplib::Request& req, const httplib::Response& res) {
    svc.log(req.method + " " + req.path + " " + std::to_string(res.status));
  });
  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    send(res, error_response(500, message));
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  auto& svr = impl_->server;
  int bound = -1;
  if (port == 0) {
    bound = svr.bind_to_any_port(host);
  } else {
    bound = svr.bind_to_port(host, port) ? port : -1;
  }
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() {
  if (!impl_->server.listen_after_bind()) throw Error("http server stopped with an error");
}

int HttpServer::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace logonet

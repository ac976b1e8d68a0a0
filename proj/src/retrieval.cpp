#include "logonet/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_set>

#include "logonet/error.hpp"
#include "logonet/image.hpp"
#include "logonet/ops.hpp"

namespace logonet {

std::optional<std::size_t> Gallery::index_of(std::string_view instance_id) const {
  for (std::size_t i = 0; i < instance_ids.size(); ++i)
    if (instance_ids[i] == instance_id) return i;
  return std::nullopt;
}

void Gallery::check(bool unit_rows) const {
  if (instance_ids.empty()) throw IntegrityError("gallery is empty");
  if (!embeddings.defined() || embeddings.rank() != 2 || embeddings.dim(0) != instance_ids.size())
    throw IntegrityError("gallery has " + std::to_string(instance_ids.size()) +
                         " ids but embeddings of shape " +
                         (embeddings.defined() ? shape_string(embeddings.shape()) : "[]"));
  std::unordered_set<std::string_view> seen;
  for (const auto& id : instance_ids)
    if (!seen.insert(id).second) throw IntegrityError("duplicate gallery instance_id '" + id + "'");
  if (!unit_rows) return;
  const std::size_t d = dim();
  const auto data = embeddings.data();
  for (std::size_t g = 0; g < size(); ++g) {
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) norm += double(data[g * d + j]) * data[g * d + j];
    if (std::abs(std::sqrt(norm) - 1.0) > 1e-4)
      throw IntegrityError("gallery row '" + instance_ids[g] + "' is not unit norm");
  }
}

Tensor<float> embed_images(const LogoNetModel& model, const std::vector<Tensor<float>>& images,
                           std::size_t batch_size) {
  if (images.empty()) throw ShapeError("embed_images: no images");
  if (batch_size == 0) batch_size = 1;
  NoGradGuard no_grad;
  const std::size_t dim = model.config().embed_dim;
  Tensor<float> out({images.size(), dim});
  auto dst = out.data();
  for (std::size_t start = 0; start < images.size(); start += batch_size) {
    const std::size_t end = std::min(images.size(), start + batch_size);
    std::vector<Tensor<float>> chunk(images.begin() + static_cast<std::ptrdiff_t>(start),
                                     images.begin() + static_cast<std::ptrdiff_t>(end));
    const auto e = embed(model, stack_batch(chunk));
    std::copy(e.data().begin(), e.data().end(), dst.begin() + static_cast<std::ptrdiff_t>(start * dim));
  }
  return out;
}

Gallery build_gallery(const LogoNetModel& model, std::vector<std::string> instance_ids,
                      const std::vector<Tensor<float>>& images) {
  if (instance_ids.empty()) throw ConfigError("build_gallery: no logos");
  if (instance_ids.size() != images.size())
    throw ShapeError("build_gallery: " + std::to_string(instance_ids.size()) + " ids but " +
                     std::to_string(images.size()) + " images");
  std::unordered_set<std::string_view> seen;
  for (const auto& id : instance_ids)
    if (!seen.insert(id).second) throw IntegrityError("duplicate gallery instance_id '" + id + "'");
  Gallery gallery;
  gallery.embeddings = embed_images(model, images);
  gallery.instance_ids = std::move(instance_ids);
  gallery.fingerprint = fingerprint(model);
  return gallery;
}

Gallery build_gallery(const LogoNetModel& model, const DatasetManifest& manifest) {
  const auto& cfg = model.config();
  std::vector<std::string> ids;
  std::vector<Tensor<float>> images;
  for (const auto& logo : manifest.logos) {
    ids.push_back(logo.instance_id);
    images.push_back(decode_image(manifest.root / logo.image_path, cfg.input_channels, cfg.input_size));
  }
  return build_gallery(model, std::move(ids), images);
}

Gallery build_gallery(const LogoNetModel& model, const DatasetImages& data) {
  std::vector<std::string> ids;
  for (const auto& logo : data.manifest.logos) ids.push_back(logo.instance_id);
  return build_gallery(model, std::move(ids), data.logos);
}

double embedding_distance(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = static_cast<double>(a[j]) - static_cast<double>(b[j]);
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

namespace {

std::vector<double> distances_to(const Gallery& gallery, std::span<const float> query) {
  const std::size_t d = gallery.dim();
  if (query.size() != d)
    throw ShapeError("rank: query has dimension " + std::to_string(query.size()) +
                     ", gallery has " + std::to_string(d));
  const auto data = gallery.embeddings.data();
  std::vector<double> out(gallery.size());
  for (std::size_t g = 0; g < out.size(); ++g) out[g] = embedding_distance(query, data.subspan(g * d, d));
  return out;
}

}  // namespace

RankedResult rank(const Gallery& gallery, std::span<const float> query,
                  std::optional<std::string_view> truth) {
  const auto dist = distances_to(gallery, query);
  std::optional<std::size_t> truth_index;
  if (truth) {
    truth_index = gallery.index_of(*truth);
    if (!truth_index) throw Error("rank: truth '" + std::string(*truth) + "' is not in the gallery");
  }
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  RankedResult result;
  result.entries.reserve(order.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    result.entries.push_back({gallery.instance_ids[order[pos]], dist[order[pos]]});
    if (truth_index && order[pos] == *truth_index) result.rank_of_truth = pos + 1;
  }
  return result;
}

std::size_t truth_rank(const Gallery& gallery, std::span<const float> query, std::size_t truth) {
  const auto dist = distances_to(gallery, query);
  if (truth >= dist.size()) throw Error("truth_rank: truth index out of range");
  std::size_t before = 0;
  for (std::size_t g = 0; g < dist.size(); ++g)
    if (dist[g] < dist[truth] || (dist[g] == dist[truth] && g < truth)) ++before;
  return before + 1;
}

double acc_at_k(std::span<const std::size_t> truth_ranks, std::size_t k) {
  if (k == 0) throw ConfigError("acc_at_k: k must be >= 1");
  if (truth_ranks.empty()) throw Error("acc_at_k: no results");
  std::size_t hits = 0;
  for (std::size_t r : truth_ranks) hits += r <= k ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth_ranks.size());
}

double acc_at_k(std::span<const RankedResult> results, std::size_t k) {
  std::vector<std::size_t> ranks;
  ranks.reserve(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].rank_of_truth) throw Error("acc_at_k: result " + std::to_string(i) + " has no truth");
    ranks.push_back(*results[i].rank_of_truth);
  }
  return acc_at_k(ranks, k);
}

EvalCell eval_cell(std::span<const std::size_t> truth_ranks) {
  EvalCell cell;
  cell.queries = truth_ranks.size();
  if (cell.queries == 0) return cell;
  cell.acc1 = acc_at_k(truth_ranks, 1);
  cell.acc5 = acc_at_k(truth_ranks, 5);
  cell.acc10 = acc_at_k(truth_ranks, 10);
  return cell;
}

std::string EvalReport::to_csv() const {
  std::string out = "subset,queries,acc1,acc5,acc10\n";
  auto row = [&](std::string_view name, const EvalCell& c) {
    char buffer[160];
    auto fmt = [](const std::optional<double>& v) {
      char b[32] = "";
      if (v) std::snprintf(b, sizeof b, "%.4f", *v);
      return std::string(b);
    };
    std::snprintf(buffer, sizeof buffer, "%.*s,%zu,%s,%s,%s\n", static_cast<int>(name.size()),
                  name.data(), c.queries, fmt(c.acc1).c_str(), fmt(c.acc5).c_str(),
                  fmt(c.acc10).c_str());
    out += buffer;
  };
  row("easy", subsets[0]);
  row("medium", subsets[1]);
  row("hard", subsets[2]);
  row("overall", overall);
  return out;
}

EvalReport evaluate(const Gallery& gallery, const Tensor<float>& query_embeddings,
                    const DatasetImages& data, Split split) {
  const auto& sketches = data.manifest.sketches;
  if (query_embeddings.rank() != 2 || query_embeddings.dim(0) != sketches.size())
    throw ShapeError("evaluate: expected one query embedding per sketch");
  const std::size_t d = query_embeddings.dim(1);
  std::vector<std::size_t> truth_of(data.manifest.logos.size());
  for (std::size_t l = 0; l < truth_of.size(); ++l) {
    const auto index = gallery.index_of(data.manifest.logos[l].instance_id);
    if (!index) throw IntegrityError("evaluate: logo '" + data.manifest.logos[l].instance_id +
                                     "' is missing from the gallery");
    truth_of[l] = *index;
  }
  std::vector<std::size_t> all;
  std::array<std::vector<std::size_t>, 3> by_subset;
  for (std::size_t i = 0; i < sketches.size(); ++i) {
    if (sketches[i].split != split) continue;
    const std::size_t r = truth_rank(gallery, query_embeddings.data().subspan(i * d, d),
                                     truth_of[data.sketch_logo[i]]);
    all.push_back(r);
    by_subset[static_cast<std::size_t>(sketches[i].subset)].push_back(r);
  }
  EvalReport report;
  report.overall = eval_cell(all);
  for (std::size_t s = 0; s < 3; ++s) report.subsets[s] = eval_cell(by_subset[s]);
  return report;
}

EvalReport evaluate(const LogoNetModel& model, const DatasetImages& data, Split split) {
  std::vector<std::size_t> queries;
  for (std::size_t i = 0; i < data.manifest.sketches.size(); ++i)
    if (data.manifest.sketches[i].split == split) queries.push_back(i);
  if (queries.empty())
    throw ConfigError("evaluate: no sketches in split '" + std::string(to_string(split)) + "'");
  const Gallery gallery = build_gallery(model, data);
  std::vector<Tensor<float>> images;
  for (std::size_t i : queries) images.push_back(data.sketches[i]);
  const auto embedded = embed_images(model, images);
  const std::size_t d = embedded.dim(1);
  Tensor<float> all({data.manifest.sketches.size(), d});
  for (std::size_t q = 0; q < queries.size(); ++q)
    std::copy_n(embedded.data().begin() + static_cast<std::ptrdiff_t>(q * d), d,
                all.data().begin() + static_cast<std::ptrdiff_t>(queries[q] * d));
  return evaluate(gallery, all, data, split);
}

}  // namespace logonet

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "logonet/dataset.hpp"
#include "logonet/model.hpp"
#include "logonet/tensor.hpp"

namespace logonet {

/// Embeddings of the candidate logos, one row per instance.
struct Gallery {
  std::vector<std::string> instance_ids;
  Tensor<float> embeddings;  // [G, D]
  std::string fingerprint;   // of the producing model

  std::size_t size() const { return instance_ids.size(); }
  std::size_t dim() const { return embeddings.defined() ? embeddings.dim(1) : 0; }
  std::optional<std::size_t> index_of(std::string_view instance_id) const;
  /// Throws IntegrityError on duplicate ids, row-count mismatch or, when
  /// `unit_rows` is set, a row norm further than 1e-4 from 1.
  void check(bool unit_rows) const;
};

/// Embeds [C,S,S] images in batches without recording a graph. Rows are
/// identical to embedding each image alone.
Tensor<float> embed_images(const LogoNetModel& model, const std::vector<Tensor<float>>& images,
                           std::size_t batch_size = 32);

Gallery build_gallery(const LogoNetModel& model, std::vector<std::string> instance_ids,
                      const std::vector<Tensor<float>>& images);
/// Decodes every logo from the dataset root; decode errors name the path.
Gallery build_gallery(const LogoNetModel& model, const DatasetManifest& manifest);
Gallery build_gallery(const LogoNetModel& model, const DatasetImages& data);

struct RankedEntry {
  std::string instance_id;
  double distance = 0.0;
};

struct RankedResult {
  std::vector<RankedEntry> entries;
  std::optional<std::size_t> rank_of_truth;  // 1-based
};

/// Euclidean distance accumulated in double over float inputs.
double embedding_distance(std::span<const float> a, std::span<const float> b);

/// Exhaustive ascending ranking of the whole gallery; ties keep gallery
/// order. `truth` sets rank_of_truth. Throws ShapeError on a dimension
/// mismatch and Error on an unknown truth id.
RankedResult rank(const Gallery& gallery, std::span<const float> query,
                  std::optional<std::string_view> truth = std::nullopt);

/// 1-based position the row `truth` would take in rank(gallery, query).
std::size_t truth_rank(const Gallery& gallery, std::span<const float> query, std::size_t truth);

double acc_at_k(std::span<const RankedResult> results, std::size_t k);
double acc_at_k(std::span<const std::size_t> truth_ranks, std::size_t k);

struct EvalCell {
  std::size_t queries = 0;
  std::optional<double> acc1;
  std::optional<double> acc5;
  std::optional<double> acc10;
};

struct EvalReport {
  EvalCell overall;
  std::array<EvalCell, 3> subsets;  // easy, medium, hard

  /// subset,queries,acc1,acc5,acc10 with rows easy, medium, hard, overall.
  std::string to_csv() const;
};

EvalCell eval_cell(std::span<const std::size_t> truth_ranks);

/// Every sketch of `split` queries a gallery of all logos.
EvalReport evaluate(const LogoNetModel& model, const DatasetImages& data, Split split = Split::test);
EvalReport evaluate(const Gallery& gallery, const Tensor<float>& query_embeddings,
                    const DatasetImages& data, Split split);

}  // namespace logonet

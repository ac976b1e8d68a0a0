// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 when
// any criterion fails. Pass criterion names as arguments to run a subset.
#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <future>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "deployment_fixture.hpp"
#include "gradient_suite.hpp"
#include "logonet/attention.hpp"
#include "logonet/autograd.hpp"
#include "logonet/cli.hpp"
#include "logonet/csv.hpp"
#include "logonet/experiments.hpp"
#include "logonet/image.hpp"
#include "logonet/ops.hpp"
#include "logonet/persistence.hpp"
#include "logonet/service.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

namespace logonet::acceptance {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Pinned tolerances and budgets.
constexpr double kTripletTolerance = 1e-6;
constexpr double kGradientBudgetSeconds = 120.0;
constexpr double kOverfitBudgetSeconds = 600.0;
constexpr std::size_t kOverfitMaxEpochs = 200;
constexpr std::size_t kOverfitCheckEvery = 5;

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Collects failed checks of one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& text) { notes_ += (notes_.empty() ? "" : "; ") + text; }
  Outcome outcome() const {
    Outcome o;
    o.pass = failures_.empty();
    o.detail = notes_;
    for (std::size_t i = 0; i < failures_.size() && i < 5; ++i)
      o.detail += (o.detail.empty() ? "" : "; ") + failures_[i];
    if (failures_.size() > 5) o.detail += "; " + std::to_string(failures_.size() - 5) + " more";
    return o;
  }

 private:
  std::vector<std::string> failures_;
  std::string notes_;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
  Checks c;
  const auto start = Clock::now();
  const auto cases = testing::run_gradient_suite();
  const double elapsed = seconds_since(start);
  std::size_t failing = 0;
  double worst = 0.0;
  for (const auto& g : cases) {
    worst = std::max(worst, g.max_error);
    if (g.max_error > testing::kGradientTolerance) {
      ++failing;
      c.expect(false, g.name + " max rel err " + std::to_string(g.max_error) + " (" +
                          std::to_string(g.failing_seeds) + "/" +
                          std::to_string(testing::kGradientSeeds) + " seeds)");
    }
  }
  c.expect(elapsed < kGradientBudgetSeconds, "runtime " + fixed(elapsed, 1) + " s");
  c.note(std::to_string(cases.size() - failing) + "/" + std::to_string(cases.size()) +
         " cases within 1e-4 at h=1e-3, worst " + std::to_string(worst) + ", " + fixed(elapsed, 1) + " s");
  return c.outcome();
}

Outcome triplet_loss_exact() {
  Checks c;
  auto row = [](float v) { return Tensor<float>({1, 1}, std::vector<float>{v}); };
  const float satisfied = triplet_loss(row(0), row(0.5f), row(0.9f), 0.2f).item();
  const float violated = triplet_loss(row(0), row(0.9f), row(0.5f), 0.2f).item();
  const Tensor<float> e({1, 3}, std::vector<float>{0.3f, -0.1f, 0.7f});
  const float degenerate = triplet_loss(e, e, e, 0.2f).item();
  c.expect(std::abs(satisfied - 0.0) <= kTripletTolerance, "(0.5,0.9,0.2) gave " + std::to_string(satisfied));
  c.expect(std::abs(violated - 0.6) <= kTripletTolerance, "(0.9,0.5,0.2) gave " + std::to_string(violated));
  c.expect(std::abs(degenerate - 0.2) <= kTripletTolerance, "equal embeddings gave " + std::to_string(degenerate));

  // A batch of satisfied triplets: every embedding gradient must be exactly 0.
  std::mt19937_64 rng(4);
  auto a = testing::random_tensor<float>({8, 4}, rng, -0.1, 0.1);
  auto p = a.clone();
  auto n = testing::random_tensor<float>({8, 4}, rng, 2.0, 3.0);
  for (auto* t : {&a, &p, &n}) t->set_requires_grad(true);
  backward(triplet_loss(a, p, n, 0.2f));
  bool zero = true;
  for (auto* t : {&a, &p, &n})
    for (float g : t->grad()) zero = zero && g == 0.0f;
  c.expect(zero, "satisfied triplets produced a nonzero gradient");
  c.note("0.5/0.9 -> " + std::to_string(satisfied) + ", 0.9/0.5 -> " + std::to_string(violated) +
         ", equal -> " + std::to_string(degenerate));
  return c.outcome();
}

Outcome attention_contracts() {
  Checks c;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    const auto f = testing::random_tensor<float>({2, 8, 6, 6}, rng, -3.0, 3.0);
    const HybridAttention<float> att{make_channel_attention<float>(8, 4, rng),
                                     make_spatial_attention<float>(7, rng)};
    const auto ca = channel_attention(f, *att.channel);
    const auto sa = spatial_attention(f, *att.spatial);
    c.expect(ca.shape() == Shape({2, 8, 1, 1}), "channel mask shape " + shape_string(ca.shape()));
    c.expect(sa.shape() == Shape({2, 1, 6, 6}), "spatial mask shape " + shape_string(sa.shape()));
    for (const auto* m : {&ca, &sa})
      for (float v : m->data()) c.expect(v > 0.0f && v < 1.0f, "mask value " + std::to_string(v) + " outside (0,1)");
    for (auto mode : {AttentionMode::channel, AttentionMode::spatial, AttentionMode::both})
      c.expect(apply_hybrid(f, att, mode).shape() == f.shape(),
               std::string("mode ") + std::string(to_string(mode)) + " changed the shape");
    const auto none = apply_hybrid(f, att, AttentionMode::none);
    c.expect(none.data().data() == f.data().data(), "mode none did not return the input itself");

    const HybridAttention<float> zero{zero_channel_attention<float>(8, 4), zero_spatial_attention<float>(7)};
    const auto out = apply_hybrid(f, zero, AttentionMode::both);
    bool quarter = true;
    for (std::size_t i = 0; i < f.numel(); ++i) quarter = quarter && out[i] == 0.25f * f[i];
    c.expect(quarter, "zero-initialized both != 0.25 * input (seed " + std::to_string(seed) + ")");
  }
  c.note("10 seeds: masks in (0,1), shapes kept, none is identity, zero init gives 0.25x");
  return c.outcome();
}

Outcome retrieval_oracle() {
  Checks c;
  const std::size_t G = 2000, D = 32, Q = 1000;
  std::mt19937_64 rng(2024);
  Gallery gallery;
  for (std::size_t i = 0; i < G; ++i) gallery.instance_ids.push_back("g" + std::to_string(i));
  gallery.embeddings = testing::random_tensor<float>({G, D}, rng);
  // Some exact duplicates so the tie rule is exercised.
  for (std::size_t i = 0; i < 20; ++i)
    std::copy_n(&gallery.embeddings[i * D], D, &gallery.embeddings[(G - 1 - i) * D]);
  const float* e = gallery.embeddings.data().data();

  std::uniform_int_distribution<std::size_t> pick(0, G - 1);
  std::vector<RankedResult> results;
  std::vector<std::size_t> oracle_ranks;
  std::size_t ranking_mismatch = 0;
  for (std::size_t q = 0; q < Q; ++q) {
    const std::size_t truth = pick(rng);
    auto query = testing::random_tensor<float>({D}, rng);
    // Every tenth query is a copy of its truth row (or of that row's duplicate).
    if (q % 10 == 0) std::copy_n(&e[truth * D], D, query.data().data());
    results.push_back(rank(gallery, query.data(), gallery.instance_ids[truth]));

    std::vector<double> dist(G);
    for (std::size_t i = 0; i < G; ++i) dist[i] = oracle::distance(query.data().data(), e + i * D, D);
    const auto order = oracle::ranking(dist);
    bool same = results.back().entries.size() == G;
    for (std::size_t r = 0; same && r < G; ++r)
      same = results.back().entries[r].instance_id == gallery.instance_ids[order[r]] &&
             results.back().entries[r].distance == dist[order[r]];
    ranking_mismatch += !same;
    oracle_ranks.push_back(static_cast<std::size_t>(std::find(order.begin(), order.end(), truth) - order.begin()) + 1);
    c.expect(results.back().rank_of_truth == oracle_ranks.back(), "truth rank differs at query " + std::to_string(q));
  }
  c.expect(ranking_mismatch == 0, std::to_string(ranking_mismatch) + " full rankings differ");
  double previous = 0.0;
  std::string accs;
  for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{10}, std::size_t{100}, G}) {
    const double ours = acc_at_k(std::span<const RankedResult>(results), k);
    std::size_t hits = 0;
    for (std::size_t r : oracle_ranks) hits += r <= k;
    const double expected = static_cast<double>(hits) / static_cast<double>(Q);
    c.expect(ours == expected, "acc@" + std::to_string(k) + " " + std::to_string(ours) + " vs " + std::to_string(expected));
    c.expect(ours >= previous, "acc@k not monotone at k=" + std::to_string(k));
    previous = ours;
    if (k <= 10) accs += " acc@" + std::to_string(k) + "=" + fixed(ours);
  }
  c.expect(previous == 1.0, "acc@G = " + std::to_string(previous));
  c.note(std::to_string(Q) + " queries x " + std::to_string(G) + " rows, rankings identical," + accs + ", acc@G=1");
  return c.outcome();
}

// ---------------------------------------------------------------------------

// Memorization run: every sketch is a training sketch, the model config is
// the default, and augmentation is off so the sketches evaluated are the
// sketches trained on.
TrainConfig overfit_train_config() {
  TrainConfig tc;
  tc.epochs = kOverfitMaxEpochs;
  tc.seed = 42;
  tc.augmentation.crop_fraction = 1.0;
  tc.augmentation.hflip_prob = 0.0;
  return tc;
}

Outcome overfit_sanity() {
  Checks c;
  testing::TempDir dir("acceptance_overfit");
  SynthOptions o;
  o.instances = 20;
  o.sketches_per_instance = 4;
  o.size = 64;
  o.seed = 42;
  auto manifest = synth_generate(o, dir.path());
  for (auto& s : manifest.sketches) s.split = Split::train;
  const LogoNetConfig config;
  const auto data = load_images(manifest, config.input_channels, config.input_size);

  const auto start = Clock::now();
  LogoNetModel model = init_model(config, 42);
  double acc1 = 0.0;
  std::size_t epochs = 0;
  train(model, data, overfit_train_config(), [&](const EpochRecord& r) {
    epochs = r.epoch;
    if (r.epoch % kOverfitCheckEvery != 0 && r.epoch != kOverfitMaxEpochs) return true;
    acc1 = *evaluate(model, data, Split::train).overall.acc1;
    std::cerr << "  overfit epoch " << r.epoch << " loss " << r.mean_loss << " train acc@1 " << acc1
              << " at " << fixed(seconds_since(start), 1) << " s\n";
    return acc1 < 1.0;
  });
  const double elapsed = seconds_since(start);
  c.expect(acc1 == 1.0, "train acc@1 " + fixed(acc1) + " after " + std::to_string(epochs) + " epochs");
  c.expect(elapsed < kOverfitBudgetSeconds, "runtime " + fixed(elapsed, 1) + " s");
  c.note("train acc@1 " + fixed(acc1) + " after " + std::to_string(epochs) + " epochs in " + fixed(elapsed, 1) + " s");
  return c.outcome();
}

// Default model and training settings; only the seed varies.
LogoNetConfig ablation_base() { return LogoNetConfig{}; }

TrainConfig ablation_train_config(std::uint64_t seed) {
  TrainConfig tc;
  tc.seed = seed;
  return tc;
}

Outcome directional_ablation() {
  Checks c;
  testing::TempDir dir("acceptance_ablation");
  SynthOptions o;
  o.instances = 200;
  o.sketches_per_instance = 4;
  o.size = 64;
  o.seed = 42;
  const auto manifest = make_split(synth_generate(o, dir.path()), SplitMode::by_sketch, 0.25, 42);
  const LogoNetConfig base = ablation_base();
  const auto data = load_images(manifest, base.input_channels, base.input_size);
  const LogoNetConfig full = ablation_config(base, {true, true, true});
  const LogoNetConfig baseline = ablation_config(base, {false, false, false});

  double full_sum = 0.0, baseline_sum = 0.0;
  std::string per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    const double f = *train_and_evaluate(full, data, ablation_train_config(seed)).overall.acc1;
    const double b = *train_and_evaluate(baseline, data, ablation_train_config(seed)).overall.acc1;
    std::cerr << "  ablation seed " << seed << " full " << f << " baseline " << b << "\n";
    full_sum += f;
    baseline_sum += b;
    per_seed += " s" + std::to_string(seed) + "=" + fixed(f, 3) + "/" + fixed(b, 3);
  }
  const double full_mean = full_sum / 3.0, baseline_mean = baseline_sum / 3.0;
  c.expect(full_mean >= baseline_mean,
           "full " + fixed(full_mean) + " < baseline " + fixed(baseline_mean));
  c.note("held-out acc@1 full " + fixed(full_mean) + " vs baseline " + fixed(baseline_mean) +
         " (full/baseline" + per_seed + ")");
  return c.outcome();
}

// ---------------------------------------------------------------------------

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

bool is_fraction(const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    return used == text.size() && v >= 0.0 && v <= 1.0;
  } catch (const std::exception&) {
    return false;
  }
}

Outcome harness_structure() {
  Checks c;
  testing::TempDir dir("acceptance_harness");
  const std::string data = (dir.path() / "data").string();
  c.expect(cli({"synth", "--out", data, "--instances", "6", "--per", "5", "--size", "16"}).code == 0, "synth failed");
  const std::vector<std::string> tiny = {"--input-size", "16", "--stage-channels", "8,8", "--embed-dim", "8",
                                         "--reduction-ratio", "2", "--spatial-kernel", "3", "--epochs", "1",
                                         "--data", data};

  auto ablate_args = tiny;
  ablate_args.insert(ablate_args.begin(), {"ablate", "--out", (dir.path() / "ablate").string()});
  const auto ablate = cli(ablate_args);
  c.expect(ablate.code == 0, "ablate exit " + std::to_string(ablate.code) + ": " + ablate.err);
  const auto ablation_rows = parse_csv(ablate.out);
  c.expect(ablation_rows.size() == 9, "ablation CSV has " + std::to_string(ablation_rows.size()) + " lines");
  if (!ablation_rows.empty())
    c.expect(ablation_rows[0] == CsvRow{"baseline", "ca", "sa", "large_kernel", "acc1", "acc5", "acc10"},
             "ablation header");
  std::set<std::string> toggles;
  for (std::size_t i = 1; i < ablation_rows.size(); ++i) {
    const auto& r = ablation_rows[i];
    c.expect(r.size() == 7, "ablation row width");
    if (r.size() != 7) continue;
    for (std::size_t j = 0; j < 4; ++j) c.expect(r[j] == "0" || r[j] == "1", "ablation toggle " + r[j]);
    for (std::size_t j = 4; j < 7; ++j) c.expect(is_fraction(r[j]), "ablation accuracy " + r[j]);
    c.expect((r[0] == "1") == (r[1] == "0" && r[2] == "0" && r[3] == "0"), "baseline flag inconsistent");
    toggles.insert(r[1] + r[2] + r[3]);
  }
  c.expect(toggles.size() == 8, "ablation covers " + std::to_string(toggles.size()) + " distinct toggles");
  c.expect(fs::exists(dir.path() / "ablate" / "ablation.csv"), "ablation.csv not written");

  auto sweep_args = tiny;
  sweep_args.insert(sweep_args.begin(), {"sweep-kernel", "--kernels", "3-9", "--out", (dir.path() / "sweep").string()});
  const auto sweep = cli(sweep_args);
  c.expect(sweep.code == 0, "sweep-kernel exit " + std::to_string(sweep.code) + ": " + sweep.err);
  const auto sweep_rows = parse_csv(sweep.out);
  c.expect(sweep_rows.size() == 8, "sweep CSV has " + std::to_string(sweep_rows.size()) + " lines");
  if (!sweep_rows.empty()) c.expect(sweep_rows[0] == CsvRow{"kernel", "acc1", "acc5", "acc10"}, "sweep header");
  for (std::size_t i = 1; i < sweep_rows.size(); ++i) {
    const auto& r = sweep_rows[i];
    c.expect(r.size() == 4 && r[0] == std::to_string(i + 2), "sweep row " + std::to_string(i));
    for (std::size_t j = 1; j < r.size(); ++j) c.expect(is_fraction(r[j]), "sweep accuracy " + r[j]);
  }
  c.note("ablate: " + std::to_string(ablation_rows.size() - 1) + " rows, sweep-kernel 3..9: " +
         std::to_string(sweep_rows.size() - 1) + " rows, schemas valid");
  return c.outcome();
}

// ---------------------------------------------------------------------------

struct TrainedRun {
  std::vector<std::uint8_t> checkpoint;
  std::vector<double> losses;
};

TrainedRun train_once(const DatasetImages& data) {
  LogoNetModel model = init_model(LogoNetConfig{}, 7);
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 7;
  TrainedRun run;
  for (const auto& r : train(model, data, tc)) run.losses.push_back(r.mean_loss);
  run.checkpoint = serialize_checkpoint(model);
  return run;
}

DatasetImages small_dataset(const fs::path& root) {
  SynthOptions o;
  o.instances = 10;
  o.sketches_per_instance = 4;
  o.seed = 42;
  return load_images(make_split(synth_generate(o, root), SplitMode::by_sketch, 0.25, 42), 1, 64);
}

Outcome determinism() {
  Checks c;
  testing::TempDir dir("acceptance_determinism");
  const auto data = small_dataset(dir.path());
  const auto a = train_once(data);
  const auto b = train_once(data);
  c.expect(a.checkpoint == b.checkpoint, "checkpoints differ");
  c.expect(a.losses == b.losses, "loss curves differ");
  c.note("default config, 3 epochs twice: checkpoints (" + std::to_string(a.checkpoint.size()) +
         " bytes) and loss curves bit-identical");
  return c.outcome();
}

Outcome persistence() {
  Checks c;
  testing::TempDir dir("acceptance_persistence");
  const auto data = small_dataset(dir.path() / "data");
  LogoNetModel model = init_model(LogoNetConfig{}, 5);
  TrainConfig tc;
  tc.epochs = 1;
  train(model, data, tc);

  save_checkpoint(model, dir.path() / "a.lgn");
  const LogoNetModel loaded = load_checkpoint(dir.path() / "a.lgn");
  save_checkpoint(loaded, dir.path() / "b.lgn");
  c.expect(read_file_bytes(dir.path() / "a.lgn") == read_file_bytes(dir.path() / "b.lgn"),
           "checkpoint save-load-save bytes differ");

  const auto before = embed_images(model, data.sketches);
  const auto after = embed_images(loaded, data.sketches);
  c.expect(std::equal(before.data().begin(), before.data().end(), after.data().begin(), after.data().end()),
           "post-load sketch embeddings differ");

  const Gallery gallery = build_gallery(model, data);
  save_gallery(gallery, dir.path() / "a.lgg");
  const Gallery reloaded = load_gallery(dir.path() / "a.lgg");
  save_gallery(reloaded, dir.path() / "b.lgg");
  c.expect(read_file_bytes(dir.path() / "a.lgg") == read_file_bytes(dir.path() / "b.lgg"),
           "gallery save-load-save bytes differ");
  const Gallery rebuilt = build_gallery(loaded, data);
  c.expect(std::equal(gallery.embeddings.data().begin(), gallery.embeddings.data().end(),
                      reloaded.embeddings.data().begin(), reloaded.embeddings.data().end()) &&
               std::equal(gallery.embeddings.data().begin(), gallery.embeddings.data().end(),
                          rebuilt.embeddings.data().begin(), rebuilt.embeddings.data().end()),
           "gallery embeddings differ after reload");
  c.note("checkpoint and gallery byte-identical after reload, embeddings bitwise equal");
  return c.outcome();
}

Outcome service() {
  Checks c;
  const testing::Deployment d("acceptance_service");
  QueryService svc;
  svc.reload(d.checkpoint(), d.gallery(), d.data());
  HttpServer server(svc);
  const int port = server.start("127.0.0.1", 0);

  auto post = [port](const std::string& path, const std::string& body) {
    httplib::Client client("127.0.0.1", port);
    auto r = client.Post(path, body, "image/png");
    if (!r) return std::string("transport error: ") + httplib::to_string(r.error());
    return r->status == 200 ? r->body : "status " + std::to_string(r->status) + ": " + r->body;
  };
  auto image = [&d](std::size_t i) {
    const auto bytes = read_file_bytes(d.logo_image(i));
    return std::string(bytes.begin(), bytes.end());
  };

  std::size_t own_first = 0;
  for (std::size_t i = 0; i < d.manifest.logos.size(); ++i) {
    const std::string body = post("/query", image(i));
    const std::string prefix = "{\"results\":[{\"distance\":0.0,\"instance_id\":\"" + d.manifest.logos[i].instance_id + "\"";
    const bool ok = body.rfind(prefix, 0) == 0;
    own_first += ok;
    c.expect(ok, "logo " + d.manifest.logos[i].instance_id + " not at rank 1: " + body.substr(0, 120));
  }

  const std::string payload = image(3);
  std::vector<std::future<std::string>> futures;
  for (int i = 0; i < 32; ++i)
    futures.push_back(std::async(std::launch::async, [&] { return post("/query?k=5", payload); }));
  std::vector<std::string> bodies;
  for (auto& f : futures) bodies.push_back(f.get());
  c.expect(bodies[0].rfind("{\"results\"", 0) == 0, "concurrent query failed: " + bodies[0]);
  const auto distinct = std::set<std::string>(bodies.begin(), bodies.end()).size();
  c.expect(distinct == 1, std::to_string(distinct) + " distinct bodies from 32 concurrent queries");

  std::size_t agree = 0;
  for (std::size_t i : {std::size_t{0}, std::size_t{5}}) {
    const auto run = cli({"query", "--checkpoint", d.checkpoint().string(), "--gallery", d.gallery().string(),
                          "--image", d.logo_image(i).string(), "--k", "4", "--data", d.data().string()});
    const bool same = run.code == 0 && run.out == post("/query?k=4", image(i)) + "\n";
    agree += same;
    c.expect(same, "CLI query and /query differ for logo " + std::to_string(i));
  }
  server.stop();
  c.note("own image at rank 1 for " + std::to_string(own_first) + "/" + std::to_string(d.manifest.logos.size()) +
         " logos, 32 concurrent bodies identical, CLI == /query on " + std::to_string(agree) + "/2");
  return c.outcome();
}

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace logonet::acceptance

int main(int argc, char** argv) {
  using namespace logonet::acceptance;
  const std::vector<Criterion> criteria = {
      {"gradient_suite", gradient_suite},
      {"triplet_loss_exact", triplet_loss_exact},
      {"attention_contracts", attention_contracts},
      {"retrieval_oracle", retrieval_oracle},
      {"overfit_sanity", overfit_sanity},
      {"directional_ablation", directional_ablation},
      {"harness_structure", harness_structure},
      {"determinism", determinism},
      {"persistence", persistence},
      {"service", service},
  };
  const std::set<std::string> selected(argv + 1, argv + argc);
  for (const auto& name : selected) {
    if (std::none_of(criteria.begin(), criteria.end(), [&](const Criterion& c) { return c.name == name; })) {
      std::cerr << "unknown criterion: " << name << "\n";
      return 2;
    }
  }
  int failed = 0;
  for (const auto& criterion : criteria) {
    if (!selected.empty() && !selected.count(criterion.name)) continue;
    const auto start = Clock::now();
    Outcome outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    failed += !outcome.pass;
    std::cout << (outcome.pass ? "PASS " : "FAIL ") << criterion.name << " (" << fixed(seconds_since(start), 1)
              << " s): " << outcome.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}

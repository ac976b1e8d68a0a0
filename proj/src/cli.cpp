#include "logonet/cli.hpp"

#include <algorithm>
#include <deque>
#include <span>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "logonet/config_text.hpp"
#include "logonet/dataset.hpp"
#include "logonet/error.hpp"
#include "logonet/experiments.hpp"
#include "logonet/image.hpp"
#include "logonet/persistence.hpp"
#include "logonet/service.hpp"
#include "logonet/training.hpp"

namespace logonet {
namespace fs = std::filesystem;

namespace {

/// Everything an experiment needs. Resolution order: defaults, then the
/// --config file, then explicit flags.
struct Settings {
  LogoNetConfig model;
  TrainConfig train;
  SplitMode split_mode = SplitMode::by_sketch;
  double test_fraction = 0.2;

  void set(std::string_view key, std::string_view value) {
    if (key == "split_mode") {
      split_mode = parse_split_mode(trim(value));
    } else if (key == "test_fraction") {
      test_fraction = parse_real(key, value);
    } else if (key == "seed") {
      train.set(key, value);
    } else {
      try {
        model.set(key, value);
      } catch (const ConfigError&) {
        train.set(key, value);
      }
    }
  }

  std::string to_text() const {
    return model.to_text() + train.to_text() + "split_mode=" + std::string(to_string(split_mode)) +
           "\ntest_fraction=" + format_real(test_fraction) + "\n";
  }
};

struct FlagSpec {
  const char* flag;
  const char* key;
  const char* help;
};

constexpr FlagSpec kTrainFlags[] = {
    {"--epochs", "epochs", "training epochs"},
    {"--lr", "learning_rate", "Adam learning rate (1e-4)"},
    {"--margin", "margin", "triplet margin (0.2)"},
    {"--batch-size", "batch_size", "triplets per step (16)"},
    {"--adam-beta1", "adam_beta1", "Adam beta1 (0.9)"},
    {"--adam-beta2", "adam_beta2", "Adam beta2 (0.999)"},
    {"--adam-eps", "adam_eps", "Adam epsilon (1e-8)"},
    {"--crop-fraction", "crop_fraction", "random crop side as a fraction of the image (0.9)"},
    {"--hflip-prob", "hflip_prob", "horizontal flip probability (0.5)"},
    {"--triplets-per-epoch", "triplets_per_epoch", "triplets per epoch, 0 = one per training sketch"},
    {"--validate-every", "validate_every", "held-out acc@1 every N epochs, 0 = never"},
};

constexpr FlagSpec kModelFlags[] = {
    {"--input-channels", "input_channels", "image channels, 1 or 3 (1)"},
    {"--input-size", "input_size", "square input side in pixels (64)"},
    {"--first-kernel", "first_kernel", "first convolution kernel size (6)"},
    {"--stage-channels", "stage_channels", "comma separated stage widths (32,64,128)"},
    {"--embed-dim", "embed_dim", "embedding dimension (128)"},
    {"--attention", "attention", "per-stage attention: none, ca, sa or both, comma separated"},
    {"--reduction-ratio", "reduction_ratio", "channel attention reduction (8)"},
    {"--spatial-kernel", "spatial_kernel", "spatial attention kernel (7)"},
    {"--normalize", "normalize_embedding", "L2-normalize embeddings, 0 or 1 (1)"},
};

constexpr FlagSpec kSplitFlags[] = {
    {"--split-mode", "split_mode", "by_sketch or by_instance, used when the manifest has no splits"},
    {"--test-fraction", "test_fraction", "held-out share for the split (0.2)"},
};

/// Flags that feed Settings::set, collected as raw text.
class SettingFlags {
 public:
  void add(CLI::App& app, std::span<const FlagSpec> specs) {
    for (const auto& spec : specs) {
      auto& slot = values_.emplace_back(spec.key, std::string());
      options_.push_back(app.add_option(spec.flag, slot.second, spec.help));
    }
  }
  void add_seed(CLI::App& app) {
    auto& slot = values_.emplace_back("seed", "42");
    options_.push_back(app.add_option("--seed", slot.second, "random seed")->capture_default_str());
  }
  void add_config(CLI::App& app) {
    app.add_option("--config", config_path_, "key=value file applied before flags")
        ->check(CLI::ExistingFile);
  }

  Settings resolve() const {
    Settings s;
    if (!config_path_.empty()) {
      std::ifstream in(config_path_);
      std::stringstream text;
      text << in.rdbuf();
      const std::string contents = text.str();
      for (const auto& [key, value] : parse_assignments(contents)) s.set(key, value);
    }
    for (std::size_t i = 0; i < options_.size(); ++i)
      if (options_[i]->count() > 0) s.set(values_[i].first, values_[i].second);
    s.model.validate();
    s.train.validate();
    return s;
  }

  std::string explicit_flags() const {
    std::string out;
    for (std::size_t i = 0; i < options_.size(); ++i)
      if (options_[i]->count() > 0)
        out += "flag." + values_[i].first + "=" + values_[i].second + "\n";
    if (!config_path_.empty()) out += "config_file=" + config_path_ + "\n";
    return out;
  }

 private:
  std::deque<std::pair<std::string, std::string>> values_;
  std::vector<CLI::Option*> options_;
  std::string config_path_;
};

void write_run_manifest(const fs::path& out_dir, std::string_view command,
                        const std::vector<std::string>& args, const std::string& settings) {
  std::string text = "command=" + std::string(command) + "\nargs=";
  for (std::size_t i = 0; i < args.size(); ++i) text += (i ? " " : "") + args[i];
  text += "\ncheckpoint_format=LGN1 v" + std::to_string(kCheckpointVersion) +
          "\ngallery_format=LGG1 v" + std::to_string(kGalleryVersion) + "\n" + settings;
  write_text_atomic(out_dir / "run_manifest.txt", text);
}

/// Loads a dataset, splitting it with the settings when no row has a split.
DatasetImages load_dataset(const fs::path& root, const Settings& s, std::size_t channels,
                           std::size_t size) {
  DatasetManifest manifest = load_manifest(root);
  if (manifest.count(Split::unassigned) == manifest.sketches.size())
    manifest = make_split(manifest, s.split_mode, s.test_fraction, s.train.seed);
  return load_images(std::move(manifest), channels, size);
}

std::vector<std::size_t> parse_kernels(const std::string& text) {
  std::vector<std::size_t> out;
  for (auto part : split_list(text)) {
    const auto t = trim(part);
    const auto dash = t.find('-');
    if (dash != std::string_view::npos) {
      const auto lo = parse_int<std::size_t>("kernels", t.substr(0, dash));
      const auto hi = parse_int<std::size_t>("kernels", t.substr(dash + 1));
      for (std::size_t k = lo; k <= hi; ++k) out.push_back(k);
    } else {
      out.push_back(parse_int<std::size_t>("kernels", t));
    }
  }
  return out;
}

void print_report(std::ostream& out, const EvalReport& report) { out << report.to_csv(); }

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sketch-to-logo retrieval: training, evaluation and query service", "logonet"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic logo/sketch dataset");
  SynthOptions synth_opts;
  std::string synth_out;
  synth->add_option("--instances", synth_opts.instances, "logo instances (>= 2)")->capture_default_str();
  synth->add_option("--per", synth_opts.sketches_per_instance, "sketches per instance")->capture_default_str();
  synth->add_option("--size", synth_opts.size, "image side in pixels")->capture_default_str();
  synth->add_option("--seed", synth_opts.seed, "random seed")->capture_default_str();
  synth->add_option("--out", synth_out, "dataset root to write")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model on a dataset");
  std::string train_data, train_out = "runs/train";
  SettingFlags train_flags;
  train_cmd->add_option("--data", train_data, "dataset root")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", train_out, "output directory")->capture_default_str();
  train_flags.add_seed(*train_cmd);
  train_flags.add(*train_cmd, kTrainFlags);
  train_flags.add(*train_cmd, kModelFlags);
  train_flags.add(*train_cmd, kSplitFlags);
  train_flags.add_config(*train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint (acc@1/5/10 per subset)");
  std::string eval_data, eval_checkpoint, eval_out, eval_split = "test";
  SettingFlags eval_flags;
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval_data, "dataset root")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--split", eval_split, "sketch split used as queries")
      ->check(CLI::IsMember({"train", "test"}))
      ->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "also write eval.csv and a run manifest here");
  eval_flags.add_seed(*eval_cmd);
  eval_flags.add(*eval_cmd, kSplitFlags);
  eval_flags.add_config(*eval_cmd);

  // sweep-kernel
  auto* sweep_cmd = app.add_subcommand("sweep-kernel", "train and evaluate one model per first-conv kernel size");
  std::string sweep_data, sweep_out = "runs/sweep-kernel", sweep_kernels = "3-9";
  SettingFlags sweep_flags;
  sweep_cmd->add_option("--data", sweep_data, "dataset root")->required()->check(CLI::ExistingDirectory);
  sweep_cmd->add_option("--out", sweep_out, "output directory")->capture_default_str();
  sweep_cmd->add_option("--kernels", sweep_kernels, "kernel list, e.g. 3-9 or 3,6,9")->capture_default_str();
  sweep_flags.add_seed(*sweep_cmd);
  sweep_flags.add(*sweep_cmd, kTrainFlags);
  sweep_flags.add(*sweep_cmd, kModelFlags);
  sweep_flags.add(*sweep_cmd, kSplitFlags);
  sweep_flags.add_config(*sweep_cmd);

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "train and evaluate the 8-row attention/kernel ablation grid");
  std::string ablate_data, ablate_out = "runs/ablate";
  SettingFlags ablate_flags;
  ablate_cmd->add_option("--data", ablate_data, "dataset root")->required()->check(CLI::ExistingDirectory);
  ablate_cmd->add_option("--out", ablate_out, "output directory")->capture_default_str();
  ablate_flags.add_seed(*ablate_cmd);
  ablate_flags.add(*ablate_cmd, kTrainFlags);
  ablate_flags.add(*ablate_cmd, kModelFlags);
  ablate_flags.add(*ablate_cmd, kSplitFlags);
  ablate_flags.add_config(*ablate_cmd);

  // index
  auto* index_cmd = app.add_subcommand("index", "embed every logo and save the gallery");
  std::string index_checkpoint, index_data, index_out = "runs/index";
  index_cmd->add_option("--checkpoint", index_checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  index_cmd->add_option("--data", index_data, "dataset root")->required()->check(CLI::ExistingDirectory);
  index_cmd->add_option("--out", index_out, "output directory (gallery.lgg)")->capture_default_str();

  // query
  auto* query_cmd = app.add_subcommand("query", "rank the gallery against one image");
  std::string query_checkpoint, query_gallery, query_image, query_data;
  std::size_t query_k = 10;
  query_cmd->add_option("--checkpoint", query_checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  query_cmd->add_option("--gallery", query_gallery, "gallery file")->required()->check(CLI::ExistingFile);
  query_cmd->add_option("--image", query_image, "PNG or JPEG query")->required()->check(CLI::ExistingFile);
  query_cmd->add_option("--k", query_k, "results to return")->capture_default_str();
  query_cmd->add_option("--data", query_data, "dataset root (thumbnail paths)");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP query service");
  std::string serve_checkpoint, serve_gallery, serve_data, serve_host = "127.0.0.1";
  int serve_port = 8080;
  serve_cmd->add_option("--checkpoint", serve_checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--gallery", serve_gallery, "gallery file")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--data", serve_data, "dataset root (thumbnails)")->required()->check(CLI::ExistingDirectory);
  serve_cmd->add_option("--host", serve_host, "bind address")->capture_default_str();
  serve_cmd->add_option("--port", serve_port, "port, 0 picks a free one")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto selected = app.get_subcommands();
    err << (selected.empty() ? app.help() : selected.front()->help());
    return 2;
  }

  try {
    if (*synth) {
      const auto manifest = synth_generate(synth_opts, synth_out);
      const auto counts = manifest.subset_counts();
      out << "wrote " << manifest.logos.size() << " logos and " << manifest.sketches.size()
          << " sketches (easy " << counts[0] << ", medium " << counts[1] << ", hard " << counts[2]
          << ") to " << synth_out << "\n";
    } else if (*train_cmd) {
      const Settings s = train_flags.resolve();
      const auto data = load_dataset(train_data, s, s.model.input_channels, s.model.input_size);
      fs::create_directories(train_out);
      write_run_manifest(train_out, "train", args, train_flags.explicit_flags() + s.to_text());
      LogoNetModel model = init_model(s.model, s.train.seed);
      err << "training " << model.parameter_count() << " parameters on "
          << data.manifest.count(Split::train) << " sketches\n";
      const auto log = train(model, data, s.train,
                             [&err](const EpochRecord& r) {
                               err << epoch_csv_line(r);
                               return true;
                             });
      save_checkpoint(model, fs::path(train_out) / "checkpoint.lgn");
      write_text_atomic(fs::path(train_out) / "train_log.csv", train_log_csv(log));
      out << "checkpoint " << (fs::path(train_out) / "checkpoint.lgn").string() << " fingerprint "
          << fingerprint(model) << "\n";
    } else if (*eval_cmd) {
      const Settings s = eval_flags.resolve();
      const LogoNetModel model = load_checkpoint(eval_checkpoint);
      const auto& cfg = model.config();
      const auto data = load_dataset(eval_data, s, cfg.input_channels, cfg.input_size);
      const auto report = evaluate(model, data, parse_split(eval_split));
      print_report(out, report);
      if (!eval_out.empty()) {
        fs::create_directories(eval_out);
        write_run_manifest(eval_out, "eval", args, eval_flags.explicit_flags() + s.to_text());
        write_text_atomic(fs::path(eval_out) / "eval.csv", report.to_csv());
      }
    } else if (*sweep_cmd) {
      const Settings s = sweep_flags.resolve();
      const auto kernels = parse_kernels(sweep_kernels);
      const auto data = load_dataset(sweep_data, s, s.model.input_channels, s.model.input_size);
      fs::create_directories(sweep_out);
      write_run_manifest(sweep_out, "sweep-kernel", args,
                         sweep_flags.explicit_flags() + "kernels=" + sweep_kernels + "\n" + s.to_text());
      const auto rows = kernel_sweep(s.model, kernels, data, s.train, [&err](const SweepRow& r) {
        err << "kernel " << r.kernel << " acc@1 " << r.result.acc1.value_or(0.0) << "\n";
      });
      const std::string csv = sweep_csv(rows);
      write_text_atomic(fs::path(sweep_out) / "sweep.csv", csv);
      out << csv;
    } else if (*ablate_cmd) {
      const Settings s = ablate_flags.resolve();
      const auto data = load_dataset(ablate_data, s, s.model.input_channels, s.model.input_size);
      fs::create_directories(ablate_out);
      write_run_manifest(ablate_out, "ablate", args, ablate_flags.explicit_flags() + s.to_text());
      const auto rows = ablate(s.model, data, s.train, [&err](const AblationRow& r) {
        err << "ca=" << r.toggle.channel << " sa=" << r.toggle.spatial
            << " large_kernel=" << r.toggle.large_kernel << " acc@1 " << r.result.acc1.value_or(0.0)
            << "\n";
      });
      const std::string csv = ablation_csv(rows);
      write_text_atomic(fs::path(ablate_out) / "ablation.csv", csv);
      out << csv;
    } else if (*index_cmd) {
      const LogoNetModel model = load_checkpoint(index_checkpoint);
      const auto gallery = build_gallery(model, load_manifest(index_data));
      fs::create_directories(index_out);
      write_run_manifest(index_out, "index", args, model.config().to_text());
      save_gallery(gallery, fs::path(index_out) / "gallery.lgg");
      out << "gallery " << (fs::path(index_out) / "gallery.lgg").string() << " with "
          << gallery.size() << " logos, model " << gallery.fingerprint << "\n";
    } else if (*query_cmd) {
      const auto snapshot = load_snapshot(query_checkpoint, query_gallery, query_data,
                                          [&err](const std::string& w) { err << "warning: " << w << "\n"; });
      out << query_json(*snapshot, read_file_bytes(query_image), query_k) << "\n";
    } else if (*serve_cmd) {
      QueryService service;
      service.set_log_sink([&err](const std::string& line) { err << line << std::endl; });
      service.reload(serve_checkpoint, serve_gallery, serve_data);
      HttpServer server(service);
      const int port = server.bind(serve_host, serve_port);
      err << "listening on http://" << serve_host << ":" << port << std::endl;
      server.listen();
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace logonet

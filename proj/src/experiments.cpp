#include "logonet/experiments.hpp"

#include <cstdio>

#include "logonet/error.hpp"

namespace logonet {

namespace {

std::string accuracy_fields(const EvalCell& cell) {
  char buffer[96];
  std::snprintf(buffer, sizeof buffer, "%.4f,%.4f,%.4f", cell.acc1.value_or(0.0),
                cell.acc5.value_or(0.0), cell.acc10.value_or(0.0));
  return buffer;
}

}  // namespace

EvalReport train_and_evaluate(const LogoNetConfig& config, const DatasetImages& data,
                              const TrainConfig& train_config) {
  LogoNetModel model = init_model(config, train_config.seed);
  train(model, data, train_config);
  return evaluate(model, data, Split::test);
}

std::vector<SweepRow> kernel_sweep(const LogoNetConfig& base, std::span<const std::size_t> kernels,
                                   const DatasetImages& data, const TrainConfig& train_config,
                                   const std::function<void(const SweepRow&)>& on_row) {
  if (kernels.empty()) throw ConfigError("kernel sweep: empty kernel list");
  for (std::size_t k : kernels)
    if (k < 1 || k > 9) throw ConfigError("kernel sweep: kernel " + std::to_string(k) + " outside 1..9");
  std::vector<SweepRow> rows;
  for (std::size_t k : kernels) {
    LogoNetConfig config = base;
    config.first_kernel = k;
    try {
      rows.push_back({k, train_and_evaluate(config, data, train_config).overall});
    } catch (const Error& e) {
      throw Error("kernel sweep, kernel " + std::to_string(k) + ": " + e.what());
    }
    if (on_row) on_row(rows.back());
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "kernel,acc1,acc5,acc10\n";
  for (const auto& r : rows) out += std::to_string(r.kernel) + "," + accuracy_fields(r.result) + "\n";
  return out;
}

std::vector<AblationToggle> ablation_grid() {
  return {{false, false, false}, {true, false, false}, {false, true, false},
          {false, false, true},  {true, true, false},  {true, false, true},
          {false, true, true},   {true, true, true}};
}

LogoNetConfig ablation_config(const LogoNetConfig& base, const AblationToggle& toggle) {
  LogoNetConfig config = base;
  config.first_kernel = toggle.large_kernel ? base.first_kernel : 3;
  config.attention_modes =
      default_placement(base.stage_channels.size(), toggle.channel, toggle.spatial);
  return config;
}

std::vector<AblationRow> ablate(const LogoNetConfig& base, const DatasetImages& data,
                                const TrainConfig& train_config,
                                const std::function<void(const AblationRow&)>& on_row) {
  std::vector<AblationRow> rows;
  for (const auto& toggle : ablation_grid()) {
    const auto config = ablation_config(base, toggle);
    try {
      rows.push_back({toggle, train_and_evaluate(config, data, train_config).overall});
    } catch (const Error& e) {
      throw Error(std::string("ablation row ca=") + (toggle.channel ? "1" : "0") +
                  " sa=" + (toggle.spatial ? "1" : "0") +
                  " large_kernel=" + (toggle.large_kernel ? "1" : "0") + ": " + e.what());
    }
    if (on_row) on_row(rows.back());
  }
  return rows;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::string out = "baseline,ca,sa,large_kernel,acc1,acc5,acc10\n";
  for (const auto& r : rows) {
    const auto& t = r.toggle;
    const bool baseline = !t.channel && !t.spatial && !t.large_kernel;
    out += std::string(baseline ? "1" : "0") + "," + (t.channel ? "1" : "0") + "," +
           (t.spatial ? "1" : "0") + "," + (t.large_kernel ? "1" : "0") + "," +
           accuracy_fields(r.result) + "\n";
  }
  return out;
}

}  // namespace logonet

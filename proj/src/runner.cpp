// Copyright 2026 The BONN Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "bonn/runner.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>

#include "bonn/anomaly.hpp"
#include "bonn/bayes_train.hpp"
#include "bonn/checkpoint.hpp"
#include "bonn/data_synth.hpp"
#include "bonn/experiments.hpp"

namespace bonn {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os << std::setprecision(digits) << std::fixed << v;
  return os.str();
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

// Converts typed-config construction failures into ConfigError.
template <typename F>
auto configured(F&& make) {
  try {
    return make();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
}

fs::path required_path(const json& cfg, const char* key) {
  const std::string p = cfg.at(key).get<std::string>();
  if (p.empty()) throw ConfigError(std::string("'") + key + "' must be set");
  return p;
}

AutoencoderSpec spec_from_config(const json& cfg) {
  return configured([&] {
    AutoencoderSpec s;
    s.variant = parse_variant(cfg.at("variant").get<std::string>());
    s.hidden = cfg.at("hidden").get<int>();
    s.latent = cfg.at("latent").get<int>();
    s.topology = parse_topology(cfg.at("topology").get<std::string>());
    s.dropout_rate = cfg.at("dropout_rate").get<double>();
    s.validate();
    return s;
  });
}

TrainConfig train_config_from_config(const json& cfg) {
  return configured([&] {
    json j = train_config_to_json(TrainConfig{});
    for (auto& [key, value] : j.items()) {
      if (cfg.contains(key)) value = cfg.at(key);
    }
    j["workers"] = workers_from_env();
    return train_config_from_json(j);
  });
}

void print_balance(const BlockDataset& data, std::ostream& log) {
  std::size_t positives = 0;
  for (std::uint8_t l : data.labels) positives += l;
  const double share = data.size() == 0 ? 0.0 : 100.0 * positives / static_cast<double>(data.size());
  log << "blocks " << data.size() << ", anomalous " << positives << " (" << fmt(share, 2) << "%)\n";
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    const std::vector<std::size_t> idx = data.indices(s);
    std::size_t pos = 0;
    for (std::size_t i : idx) pos += data.labels[i];
    const char* name = s == Split::kTrain ? "train" : s == Split::kVal ? "val" : "test";
    log << "  " << name << ": " << idx.size() << " blocks, " << pos << " anomalous\n";
  }
}

void cmd_gen_data(const json& cfg, const fs::path& out, std::ostream& log) {
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  const int scans = cfg.at("scans").get<int>();
  const int edge = cfg.at("edge").get<int>();
  const int block = cfg.at("block_edge").get<int>();
  const double prevalence = cfg.at("prevalence").get<double>();
  const double train_fraction = cfg.at("train_fraction").get<double>();
  const double val_fraction = cfg.at("val_fraction").get<double>();
  if (scans < 1) throw ConfigError("scans must be positive");
  if (block < 4 || edge < block || edge % block != 0 || edge % 16 != 0) {
    throw ConfigError("edge must be a multiple of 16 and of block_edge");
  }
  if (prevalence < 0.0 || prevalence > 1.0) throw ConfigError("prevalence must lie in [0, 1]");
  if (train_fraction < 0.0 || val_fraction < 0.0 || train_fraction + val_fraction > 1.0) {
    throw ConfigError("split fractions must be nonnegative and sum to at most 1");
  }

  BlockDataset data;
  data.block_edge = block;
  for (int s = 0; s < scans; ++s) {
    const std::uint64_t scan_seed = derive_seed(seed, {static_cast<std::uint64_t>(s)});
    const VoxelScan scan =
        generate_scan(edge, random_defects(edge, block, prevalence, scan_seed), scan_seed);
    data.append(decompose(scan, block));
  }
  assign_splits(data, train_fraction, val_fraction, derive_seed(seed, {1000003}));
  save_dataset(data, out / cfg.at("output").get<std::string>());
  print_balance(data, log);
}

std::string train_log_csv(const TrainState& state) {
  std::string csv = "member,epoch,train_loss,val_mse\n";
  for (const EpochRecord& r : state.history) {
    csv += std::to_string(r.member) + "," + std::to_string(r.epoch) + "," + num(r.train_loss) +
           "," + num(r.val_mse) + "\n";
  }
  return csv;
}

void print_angle_summary(const Sequential& model, const TrainedModel& trained, std::ostream& log) {
  const std::vector<bool> mask = model.angle_mask();
  const Eigen::VectorXd sigma = trained.posterior.sigma();
  double mu_abs = 0.0, sig = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    mu_abs += std::abs(trained.posterior.mu[static_cast<Eigen::Index>(i)]);
    sig += sigma[static_cast<Eigen::Index>(i)];
    ++count;
  }
  if (count == 0) return;
  log << "angles " << count << ": mean |mu| " << fmt(mu_abs / count) << ", mean sigma "
      << fmt(sig / count) << "\n";
}

void cmd_train(const json& cfg, const fs::path& out, std::ostream& log) {
  const AutoencoderSpec spec = spec_from_config(cfg);
  const TrainConfig tc = train_config_from_config(cfg);
  const TrainMode mode = configured([&] { return parse_mode(cfg.at("mode").get<std::string>()); });
  const BlockDataset data = load_dataset(required_path(cfg, "dataset"));
  if (data.block_edge != spec.block_edge) throw ConfigError("dataset block edge does not match");
  print_balance(data, log);
  const Sequential model = build_autoencoder(spec);
  const Eigen::MatrixXd train = data.matrix(data.indices(Split::kTrain));
  const Eigen::MatrixXd val = data.matrix(data.indices(Split::kVal));

  TrainState state;
  const std::string resume = cfg.at("resume").get<std::string>();
  if (!resume.empty()) {
    Checkpoint ck = load_checkpoint(resume);
    if (spec_to_json(ck.spec) != spec_to_json(spec) || ck.state.model.mode != mode ||
        ck.config.seed != tc.seed) {
      throw ConfigError("resume checkpoint does not match the architecture, mode or seed");
    }
    state = std::move(ck.state);
    log << "resuming after epoch " << state.epochs_done << "\n";
  } else {
    state = init_train_state(model, mode, tc);
  }
  if (state.epochs_done > tc.epochs) throw ConfigError("checkpoint is already past 'epochs'");

  log << variant_name(spec.variant) << " (" << mode_name(mode) << "), " << model.num_params()
      << " parameters, " << train.cols() << " training blocks\n";
  while (state.epochs_done < tc.epochs) {
    const std::size_t before = state.history.size();
    train_epochs(model, state, train, val, tc, 1);
    for (std::size_t k = before; k < state.history.size(); ++k) {
      const EpochRecord& r = state.history[k];
      log << "  member " << r.member << " epoch " << r.epoch << " loss " << fmt(r.train_loss, 8)
          << " val_mse " << fmt(r.val_mse, 8) << "\n";
    }
  }
  save_checkpoint({spec, tc, state}, out / cfg.at("checkpoint").get<std::string>());
  write_text(out / "train_log.csv", train_log_csv(state));
  if (mode == TrainMode::kBayesian) print_angle_summary(model, state.model, log);
}

void cmd_evaluate(const json& cfg, const fs::path& out, std::ostream& log) {
  EvaluationOptions opts;
  opts.samples = cfg.at("eval_samples").get<int>();
  opts.num_bins = cfg.at("num_bins").get<int>();
  opts.seed = cfg.at("seed").get<std::uint64_t>();
  if (opts.samples < 1) throw ConfigError("eval_samples must be positive");
  if (opts.num_bins < 1) throw ConfigError("num_bins must be positive");
  const Checkpoint ck = load_checkpoint(required_path(cfg, "checkpoint"));
  const BlockDataset data = load_dataset(required_path(cfg, "dataset"));
  const Sequential model = build_autoencoder(ck.spec);
  std::string name = cfg.at("name").get<std::string>();
  if (name.empty()) {
    name = std::string(variant_name(ck.spec.variant)) + " (" +
           std::string(mode_name(ck.state.model.mode)) + ")";
  }
  const EvaluationReport report = evaluate(model, ck.state.model, data, name, opts);
  write_text(out / "metrics.json", metrics_json(report).dump(2) + "\n");
  write_text(out / "metrics.csv", metrics_csv_header() + "\n" + metrics_csv_row(report) + "\n");
  write_text(out / "decisions.jsonl", decisions_jsonl(report));
  log << "threshold " << num(report.threshold.tau)
      << (report.threshold.degenerate ? " (degenerate)" : "") << "\n";
  log << metrics_csv_header() << "\n" << metrics_csv_row(report) << "\n";
}

void cmd_fidelity(const json& cfg, const fs::path& out, std::ostream& log) {
  const FidelityConfig fc = configured([&] {
    FidelityConfig c;
    c.n = cfg.at("n").get<int>();
    c.num_inputs = cfg.at("num_inputs").get<int>();
    c.input_source = cfg.at("input_source").get<std::string>();
    c.seed = cfg.at("seed").get<std::uint64_t>();
    const auto low = cfg.at("shots_low").get<std::uint64_t>();
    const auto high = cfg.at("shots_high").get<std::uint64_t>();
    const double eps = cfg.at("gate_error").get<double>();
    const double flip = cfg.at("readout_flip").get<double>();
    auto make = [](std::optional<std::uint64_t> shots, double e, double f) {
      NoiseModel nm;
      nm.shots = shots;
      nm.gate_error = e;
      nm.readout_flip = f;
      return nm;
    };
    c.modes = {{"exact", make(std::nullopt, 0.0, 0.0)},
               {"shots_" + std::to_string(low), make(low, 0.0, 0.0)},
               {"shots_" + std::to_string(high), make(high, 0.0, 0.0)},
               {"noisy_" + std::to_string(low), make(low, eps, flip)},
               {"noisy_" + std::to_string(high), make(high, eps, flip)}};
    if (low < 1 || high < 1) throw std::invalid_argument("shot counts must be positive");
    c.validate();
    return c;
  });
  const FidelityResult r = run_fidelity(fc);
  write_text(out / "fidelity.csv", fidelity_csv(r));
  for (std::size_t m = 0; m < r.modes.size(); ++m) {
    const std::optional<double> a = r.average(m);
    log << r.modes[m] << " average fidelity " << (a ? fmt(*a, 7) : std::string("all leaked"))
        << "\n";
  }
}

void cmd_hw_fraction(const json& cfg, const fs::path& out, std::ostream& log) {
  const HwFractionConfig hc = configured([&] {
    HwFractionConfig c;
    c.slice = cfg.at("slice").get<int>();
    c.shots = cfg.at("shots").get<std::uint64_t>();
    c.gate_error = cfg.at("gate_error").get<double>();
    c.readout_flip = cfg.at("readout_flip").get<double>();
    c.repeats = cfg.at("repeats").get<int>();
    c.seed = cfg.at("seed").get<std::uint64_t>();
    const int step = cfg.at("fraction_step").get<int>();
    if (step < 1 || step > 100) throw std::invalid_argument("fraction_step must lie in [1, 100]");
    c.fractions.clear();
    for (int f = 0; f < 100; f += step) c.fractions.push_back(f);
    c.fractions.push_back(100);
    c.validate();
    return c;
  });
  const Checkpoint ck = load_checkpoint(required_path(cfg, "checkpoint"));
  if (ck.spec.variant != Variant::kQcnn3d) throw ConfigError("hw-fraction needs a QCNN3D checkpoint");
  if (hc.slice >= ck.spec.block_edge) throw ConfigError("slice outside the block");
  const BlockDataset data = load_dataset(required_path(cfg, "dataset"));
  const Sequential model = build_autoencoder(ck.spec);

  long long block_id = cfg.at("block_id").get<long long>();
  if (block_id < 0) {
    // Largest anomaly in the test split.
    std::uint32_t best = 0;
    for (std::size_t i : data.indices(Split::kTest)) {
      if (data.labels[i] != 0 && data.sizes[i] > best) {
        best = data.sizes[i];
        block_id = static_cast<long long>(i);
      }
    }
    if (block_id < 0) throw std::runtime_error("no anomalous test block to run on");
  }
  if (static_cast<std::size_t>(block_id) >= data.size()) throw ConfigError("block_id out of range");
  const Eigen::MatrixXd block = data.matrix({static_cast<std::size_t>(block_id)});
  const HwFractionResult r =
      run_hw_fraction(model, representative_params(ck.state.model), block.col(0), hc);
  write_text(out / "hw_fraction.csv", hw_fraction_csv(r));
  const std::string summary = hw_fraction_summary_csv(r);
  write_text(out / "hw_fraction_summary.csv", summary);
  log << "block " << block_id << " (anomaly size " << data.sizes[static_cast<std::size_t>(block_id)]
      << "), " << r.circuits << " circuits in slice " << hc.slice << "\n"
      << summary;
}

json merge_value(const std::string& key, const json& current, json value) {
  if (current.is_string()) {
    if (!value.is_string()) throw ConfigError("key '" + key + "' expects a string");
    return value;
  }
  if (current.is_boolean()) {
    if (!value.is_boolean()) throw ConfigError("key '" + key + "' expects a boolean");
    return value;
  }
  if (current.is_number_float()) {
    if (!value.is_number()) throw ConfigError("key '" + key + "' expects a number");
    return value.get<double>();
  }
  if (current.is_number_unsigned()) {
    if (value.is_number_unsigned()) return value;
    if (value.is_number_integer() && value.get<long long>() >= 0) return value.get<std::uint64_t>();
    throw ConfigError("key '" + key + "' expects a nonnegative integer");
  }
  if (current.is_number_integer()) {
    if (!value.is_number_integer()) throw ConfigError("key '" + key + "' expects an integer");
    return value;
  }
  throw ConfigError("key '" + key + "' has an unsupported type");
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"gen-data", "train", "evaluate",
                                                 "experiment fidelity", "experiment hw-fraction"};
  return names;
}

json default_config(std::string_view command) {
  const TrainConfig t;
  const AutoencoderSpec s;
  const std::uint64_t seed = 0;
  if (command == "gen-data") {
    return {{"seed", seed},         {"scans", 10},           {"edge", 96},
            {"block_edge", 16},     {"prevalence", 0.025},   {"train_fraction", 0.7},
            {"val_fraction", 0.15}, {"output", "dataset.bonn"}};
  }
  if (command == "train") {
    return {{"seed", seed},
            {"dataset", ""},
            {"variant", std::string(variant_name(s.variant))},
            {"mode", "PE"},
            {"hidden", s.hidden},
            {"latent", s.latent},
            {"topology", std::string(topology_name(s.topology))},
            {"dropout_rate", t.dropout_rate},
            {"learning_rate", t.learning_rate},
            {"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"mc_samples", t.mc_samples},
            {"eval_samples", t.eval_samples},
            {"kl_scale", t.kl_scale},
            {"sigma_lik", t.sigma_lik},
            {"momentum", t.momentum},
            {"optimizer", std::string(optimizer_name(t.optimizer))},
            {"init_sigma", t.init_sigma},
            {"ensemble_size", t.ensemble_size},
            {"resume", ""},
            {"checkpoint", "model.ckpt"}};
  }
  if (command == "evaluate") {
    return {{"seed", seed}, {"dataset", ""}, {"checkpoint", ""}, {"eval_samples", t.eval_samples},
            {"num_bins", 10}, {"name", ""}};
  }
  if (command == "experiment fidelity") {
    return {{"seed", seed},           {"n", 8},
            {"num_inputs", 8},        {"input_source", "random"},
            {"gate_error", kDefaultGateError}, {"readout_flip", kDefaultReadoutFlip},
            {"shots_low", std::uint64_t{1000}}, {"shots_high", std::uint64_t{10000}}};
  }
  if (command == "experiment hw-fraction") {
    return {{"seed", seed},       {"checkpoint", ""},
            {"dataset", ""},      {"block_id", -1},
            {"slice", 14},        {"shots", std::uint64_t{5000}},
            {"repeats", 5},       {"fraction_step", 10},
            {"gate_error", kDefaultGateError}, {"readout_flip", kDefaultReadoutFlip}};
  }
  throw ConfigError("unknown command '" + std::string(command) + "'");
}

json resolve_config(std::string_view command, const std::optional<fs::path>& config_file,
                    const std::vector<std::string>& overrides,
                    std::optional<std::uint64_t> seed) {
  json cfg = default_config(command);
  auto apply = [&](const std::string& key, const json& value) {
    if (!cfg.contains(key)) {
      throw ConfigError("unknown key '" + key + "' for " + std::string(command));
    }
    cfg[key] = merge_value(key, cfg[key], value);
  };
  if (config_file) {
    std::ifstream f(*config_file);
    if (!f) throw ConfigError("cannot read config file " + config_file->string());
    json file;
    try {
      file = json::parse(f);
    } catch (const json::exception& e) {
      throw ConfigError("malformed config file: " + std::string(e.what()));
    }
    if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
    for (const auto& [key, value] : file.items()) apply(key, value);
  }
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must be key=value: " + kv);
    const std::string key = kv.substr(0, eq), text = kv.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded() || (cfg.contains(key) && cfg[key].is_string())) value = text;
    apply(key, value);
  }
  if (seed) cfg["seed"] = *seed;
  return cfg;
}

int workers_from_env() {
  const char* v = std::getenv("BONN_WORKERS");
  if (v == nullptr || *v == '\0') return 1;
  try {
    const int w = std::stoi(v);
    if (w < 1) throw ConfigError("BONN_WORKERS must be a positive integer");
    return w;
  } catch (const std::logic_error&) {
    throw ConfigError("BONN_WORKERS must be a positive integer");
  }
}

void run_command(std::string_view command, const json& config, const fs::path& out_dir,
                 std::ostream& log) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out_dir.string());
  json resolved = config;
  resolved["command"] = std::string(command);
  write_text(out_dir / "resolved_config.json", resolved.dump(2) + "\n");
  if (command == "gen-data") return cmd_gen_data(config, out_dir, log);
  if (command == "train") return cmd_train(config, out_dir, log);
  if (command == "evaluate") return cmd_evaluate(config, out_dir, log);
  if (command == "experiment fidelity") return cmd_fidelity(config, out_dir, log);
  if (command == "experiment hw-fraction") return cmd_hw_fraction(config, out_dir, log);
  throw ConfigError("unknown command '" + std::string(command) + "'");
}

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian orthogonal neural networks for voxel anomaly detection"};
  app.require_subcommand(1);

  struct Flags {
    std::string config;
    std::uint64_t seed = 0;
    std::string out = ".";
    std::vector<std::string> sets;
  };
  std::vector<std::pair<std::string, CLI::App*>> commands;
  std::vector<Flags> flags(command_names().size());
  auto add_flags = [&](CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "JSON config file");
    sub->add_option("--seed", f.seed, "global seed");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--set", f.sets, "override key=value")->take_all();
  };
  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic block dataset");
  CLI::App* train = app.add_subcommand("train", "train an autoencoder");
  CLI::App* eval = app.add_subcommand("evaluate", "calibrate and classify; write metrics");
  CLI::App* exp = app.add_subcommand("experiment", "hardware emulation experiments");
  exp->require_subcommand(1);
  CLI::App* fid = exp->add_subcommand("fidelity", "loader + pyramid fidelity under noise");
  CLI::App* hw = exp->add_subcommand("hw-fraction", "MSE vs fraction of noisy circuits");
  commands = {{"gen-data", gen}, {"train", train}, {"evaluate", eval},
              {"experiment fidelity", fid}, {"experiment hw-fraction", hw}};
  for (std::size_t k = 0; k < commands.size(); ++k) add_flags(commands[k].second, flags[k]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  for (std::size_t k = 0; k < commands.size(); ++k) {
    if (!commands[k].second->parsed()) continue;
    const Flags& f = flags[k];
    const std::string& name = commands[k].first;
    try {
      const std::optional<fs::path> file =
          f.config.empty() ? std::nullopt : std::optional<fs::path>(f.config);
      const std::optional<std::uint64_t> seed =
          commands[k].second->count("--seed") > 0 ? std::optional<std::uint64_t>(f.seed)
                                                  : std::nullopt;
      const json cfg = resolve_config(name, file, f.sets, seed);
      run_command(name, cfg, f.out, out);
      return kExitOk;
    } catch (const ConfigError& e) {
      err << "config error: " << e.what() << "\n";
      return kExitConfig;
    } catch (const DivergenceError& e) {
      err << "training diverged at step " << e.step() << ": " << e.what() << "\n";
      return kExitRuntime;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitRuntime;
    }
  }
  return kExitConfig;
}

}  // namespace bonn

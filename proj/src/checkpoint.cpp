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


#include "bonn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <vector>

namespace bonn {
namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v;
  std::memcpy(&v, in.data() + at, 4);
  return v;
}

struct Array {
  std::string name;
  const Eigen::VectorXd* data;
};

void optimizer_arrays(std::vector<Array>& arrays, const OptimizerState& s, std::size_t k) {
  const std::string prefix = "optimizer" + std::to_string(k);
  if (s.m.size() > 0) arrays.push_back({prefix + "/m", &s.m});
  if (s.v.size() > 0) arrays.push_back({prefix + "/v", &s.v});
}

}  // namespace

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"mc_samples", c.mc_samples},
          {"eval_samples", c.eval_samples},
          {"kl_scale", c.kl_scale},
          {"seed", c.seed},
          {"dropout_rate", c.dropout_rate},
          {"ensemble_size", c.ensemble_size},
          {"sigma_lik", c.sigma_lik},
          {"momentum", c.momentum},
          {"optimizer", std::string(optimizer_name(c.optimizer))},
          {"init_sigma", c.init_sigma},
          {"workers", c.workers}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  const nlohmann::json defaults = train_config_to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw std::invalid_argument("unknown training key '" + key + "'");
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("learning_rate", c.learning_rate);
  get("epochs", c.epochs);
  get("batch_size", c.batch_size);
  get("mc_samples", c.mc_samples);
  get("eval_samples", c.eval_samples);
  get("kl_scale", c.kl_scale);
  get("seed", c.seed);
  get("dropout_rate", c.dropout_rate);
  get("ensemble_size", c.ensemble_size);
  get("sigma_lik", c.sigma_lik);
  get("momentum", c.momentum);
  if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  get("init_sigma", c.init_sigma);
  get("workers", c.workers);
  c.validate();
  return c;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const TrainedModel& m = ck.state.model;
  std::vector<Array> arrays;
  if (m.mode == TrainMode::kBayesian) {
    arrays.push_back({"posterior/mu", &m.posterior.mu});
    arrays.push_back({"posterior/rho", &m.posterior.rho});
  } else {
    for (std::size_t k = 0; k < m.members.size(); ++k) {
      arrays.push_back({"member" + std::to_string(k) + "/params", &m.members[k]});
    }
  }
  nlohmann::json steps = nlohmann::json::array();
  for (std::size_t k = 0; k < ck.state.optimizers.size(); ++k) {
    optimizer_arrays(arrays, ck.state.optimizers[k], k);
    steps.push_back(ck.state.optimizers[k].step);
  }
  nlohmann::json directory = nlohmann::json::array();
  for (const Array& a : arrays) directory.push_back({{"name", a.name}, {"size", a.data->size()}});
  nlohmann::json history = nlohmann::json::array();
  for (const EpochRecord& r : ck.state.history) {
    history.push_back({{"member", r.member}, {"epoch", r.epoch}, {"train_loss", r.train_loss},
                       {"val_mse", r.val_mse}});
  }
  const nlohmann::json header = {{"spec", spec_to_json(ck.spec)},
                                 {"mode", std::string(mode_name(m.mode))},
                                 {"seed", ck.config.seed},
                                 {"config", train_config_to_json(ck.config)},
                                 {"epochs_done", ck.state.epochs_done},
                                 {"members", m.members.size()},
                                 {"dropout_rate", m.dropout_rate},
                                 {"optimizer_steps", steps},
                                 {"history", history},
                                 {"arrays", directory}};
  const std::string text = header.dump();

  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const Array& a : arrays) {
    for (Eigen::Index i = 0; i < a.data->size(); ++i) {
      const float f = static_cast<float>((*a.data)[i]);
      char b[4];
      std::memcpy(b, &f, 4);
      out.append(b, 4);
    }
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw CheckpointError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw CheckpointError("cannot open checkpoint: " + path.string());
  const std::string in((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  constexpr std::size_t kFixed = sizeof(kCheckpointMagic) + 8;
  if (in.size() < kFixed || std::memcmp(in.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw CheckpointError("not a checkpoint file: " + path.string());
  }
  if (get_u32(in, 8) != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(get_u32(in, 8)));
  }
  const std::size_t len = get_u32(in, 12);
  if (in.size() < kFixed + len) throw CheckpointError("truncated checkpoint header");

  Checkpoint ck;
  try {
    const nlohmann::json h = nlohmann::json::parse(in.substr(kFixed, len));
    ck.spec = spec_from_json(h.at("spec"));
    ck.config = train_config_from_json(h.at("config"));
    ck.state.epochs_done = h.at("epochs_done").get<int>();
    TrainedModel& m = ck.state.model;
    m.mode = parse_mode(h.at("mode").get<std::string>());
    m.dropout_rate = h.at("dropout_rate").get<double>();
    const auto steps = h.at("optimizer_steps").get<std::vector<std::int64_t>>();
    ck.state.optimizers.resize(steps.size());
    for (std::size_t k = 0; k < steps.size(); ++k) ck.state.optimizers[k].step = steps[k];
    m.members.resize(h.at("members").get<std::size_t>());
    for (const auto& r : h.at("history")) {
      ck.state.history.push_back({r.at("member").get<int>(), r.at("epoch").get<int>(),
                                  r.at("train_loss").get<double>(), r.at("val_mse").get<double>()});
    }

    std::size_t at = kFixed + len;
    std::set<std::string> seen;
    for (const auto& entry : h.at("arrays")) {
      const std::string name = entry.at("name").get<std::string>();
      const std::size_t size = entry.at("size").get<std::size_t>();
      if (!seen.insert(name).second) throw CheckpointError("duplicate array '" + name + "'");
      if (in.size() < at + 4 * size) throw CheckpointError("truncated array '" + name + "'");
      Eigen::VectorXd v(static_cast<Eigen::Index>(size));
      for (std::size_t i = 0; i < size; ++i) {
        float f;
        std::memcpy(&f, in.data() + at + 4 * i, 4);
        v[static_cast<Eigen::Index>(i)] = f;
      }
      at += 4 * size;

      const auto slash = name.find('/');
      const std::string group = name.substr(0, slash), field = name.substr(slash + 1);
      if (name == "posterior/mu") {
        m.posterior.mu = std::move(v);
      } else if (name == "posterior/rho") {
        m.posterior.rho = std::move(v);
      } else if (group.rfind("member", 0) == 0 && field == "params") {
        m.members.at(std::stoul(group.substr(6))) = std::move(v);
      } else if (group.rfind("optimizer", 0) == 0 && (field == "m" || field == "v")) {
        OptimizerState& s = ck.state.optimizers.at(std::stoul(group.substr(9)));
        (field == "m" ? s.m : s.v) = std::move(v);
      } else {
        throw CheckpointError("unknown array '" + name + "'");
      }
    }
    if (at != in.size()) throw CheckpointError("trailing bytes after checkpoint arrays");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw CheckpointError(std::string("inconsistent checkpoint: ") + e.what());
  }

  const Sequential model = build_autoencoder(ck.spec);
  const auto expect = static_cast<Eigen::Index>(model.num_params());
  const TrainedModel& m = ck.state.model;
  if (m.mode == TrainMode::kBayesian) {
    if (m.posterior.mu.size() != expect || m.posterior.rho.size() != expect) {
      throw CheckpointError("posterior size does not match the architecture");
    }
  } else {
    if (m.members.empty()) throw CheckpointError("checkpoint holds no parameters");
    for (const Eigen::VectorXd& p : m.members) {
      if (p.size() != expect) throw CheckpointError("parameter size does not match the architecture");
    }
  }
  return ck;
}

}  // namespace bonn

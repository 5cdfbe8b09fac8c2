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


// Python bindings for the circuit simulator, metrics, dataset I/O and the
// command line front end.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "bonn/bayes_train.hpp"
#include "bonn/data_synth.hpp"
#include "bonn/experiments.hpp"
#include "bonn/metrics.hpp"
#include "bonn/runner.hpp"
#include "bonn/subspace_sim.hpp"

namespace py = pybind11;

namespace bonn {
namespace {

Topology topology_arg(const std::string& name) { return parse_topology(name); }

std::tuple<int, std::string, std::string> run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "bonn");
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  int code = 0;
  {
    py::gil_scoped_release release;
    code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  }
  return {code, out.str(), err.str()};
}

}  // namespace
}  // namespace bonn

PYBIND11_MODULE(_core, m) {
  using namespace bonn;
  m.doc() = "Orthogonal quantum-inspired layers and Bayesian anomaly detection";

  m.def(
      "apply_rbs",
      [](const Eigen::VectorXd& amplitudes, int i, int j, double theta) {
        return Eigen::VectorXd(apply_rbs(UnaryState(amplitudes), i, j, theta).amplitudes());
      },
      py::arg("amplitudes"), py::arg("i"), py::arg("j"), py::arg("theta"));
  m.def(
      "num_params",
      [](const std::string& topology, int n) { return build_layout(topology_arg(topology), n).num_params; },
      py::arg("topology"), py::arg("n"));
  m.def(
      "layer_matrix",
      [](const std::string& topology, int n, const Eigen::VectorXd& angles) {
        return layer_matrix(build_layout(topology_arg(topology), n), angles);
      },
      py::arg("topology"), py::arg("n"), py::arg("angles"));
  m.def(
      "loader_angles",
      [](const Eigen::VectorXd& x, const std::string& topology) {
        return loader_angles(x, topology_arg(topology));
      },
      py::arg("x"), py::arg("topology"));
  m.def(
      "load_vector",
      [](const Eigen::VectorXd& x, const std::string& topology) {
        const Topology t = topology_arg(topology);
        const int n = static_cast<int>(x.size());
        return Eigen::VectorXd(
            simulate(build_layout(t, n), loader_angles(x, t), UnaryState::basis(n, 0)).amplitudes());
      },
      py::arg("x"), py::arg("topology"), "Amplitudes prepared from e_0 by the loader.");

  m.def(
      "kl_term",
      [](const Eigen::VectorXd& mu, const Eigen::VectorXd& rho) { return kl_term({mu, rho}); },
      py::arg("mu"), py::arg("rho"));
  m.def("softplus", &softplus, py::arg("rho"));
  m.def("inverse_softplus", &inverse_softplus, py::arg("sigma"));

  m.def(
      "ece",
      [](const std::vector<double>& confidences, const std::vector<std::uint8_t>& correct,
         int num_bins) { return ece(confidences, correct, num_bins).ece; },
      py::arg("confidences"), py::arg("correct"), py::arg("num_bins") = 10);
  m.def(
      "precision_recall_f1",
      [](const std::vector<std::uint8_t>& truth, const std::vector<std::uint8_t>& predicted) {
        const ClassificationScores s = precision_recall_f1(truth, predicted);
        return std::tuple{s.precision, s.recall, s.f1};
      },
      py::arg("truth"), py::arg("predicted"));
  m.def(
      "sda_luda",
      [](const std::vector<std::uint8_t>& truth, const std::vector<std::uint8_t>& predicted,
         const std::vector<std::uint32_t>& sizes) {
        const AnomalySizeExtremes e = sda_luda(truth, predicted, sizes);
        return std::tuple{e.sda, e.luda};
      },
      py::arg("truth"), py::arg("predicted"), py::arg("sizes"));

  m.def(
      "fidelity",
      [](int n, int num_inputs, std::uint64_t seed) {
        FidelityConfig cfg;
        cfg.n = n;
        cfg.num_inputs = num_inputs;
        cfg.seed = seed;
        FidelityResult r;
        {
          py::gil_scoped_release release;
          r = run_fidelity(cfg);
        }
        py::dict averages;
        for (std::size_t i = 0; i < r.modes.size(); ++i) averages[py::str(r.modes[i])] = r.average(i);
        return averages;
      },
      py::arg("n") = 8, py::arg("num_inputs") = 8, py::arg("seed") = 0,
      "Average fidelity per default mode.");

  m.def(
      "load_dataset",
      [](const std::string& path) {
        const BlockDataset d = load_dataset(path);
        Eigen::MatrixXf blocks(static_cast<Eigen::Index>(d.size()),
                               static_cast<Eigen::Index>(d.size() ? d.blocks[0].size() : 0));
        for (std::size_t i = 0; i < d.size(); ++i) {
          for (std::size_t k = 0; k < d.blocks[i].size(); ++k) {
            blocks(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = d.blocks[i][k];
          }
        }
        std::vector<int> splits;
        for (Split s : d.splits) splits.push_back(static_cast<int>(s));
        py::dict out;
        out["block_edge"] = d.block_edge;
        out["blocks"] = blocks;
        out["labels"] = d.labels;
        out["sizes"] = d.sizes;
        out["splits"] = splits;
        return out;
      },
      py::arg("path"),
      "Blocks as a (count, edge^3) float32 array plus labels, sizes and splits (0 train, 1 val, 2 test).");

  m.def("run_cli", &run_cli, py::arg("args"),
        "Runs the command line front end in-process; returns (exit_code, stdout, stderr).");
}

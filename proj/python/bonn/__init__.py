# Copyright 2026 The BONN Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


"""Orthogonal quantum-inspired layers and Bayesian anomaly detection."""

from bonn._core import (
    apply_rbs,
    ece,
    fidelity,
    inverse_softplus,
    kl_term,
    layer_matrix,
    load_dataset,
    load_vector,
    loader_angles,
    num_params,
    precision_recall_f1,
    run_cli,
    sda_luda,
    softplus,
)

__all__ = [
    "apply_rbs",
    "ece",
    "fidelity",
    "inverse_softplus",
    "kl_term",
    "layer_matrix",
    "load_dataset",
    "load_vector",
    "loader_angles",
    "num_params",
    "precision_recall_f1",
    "run_cli",
    "sda_luda",
    "softplus",
]

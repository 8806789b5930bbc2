"""Decoder upsampling layers on a small numpy autodiff core, with cost counting, losses, metrics
and checkerboard-artifact analysis."""

from decoderlab.artifacts import ArtifactReport, artifact_rate, dependency_map
from decoderlab.costs import CostInputs, CostReport, introspect_costs, table1_macs, table1_params
from decoderlab.decoders import (Network, NetworkTopology, Upsampler, UpsamplerKind, UpsamplerSpec, build_network,
                                 make_topology, residual_wrap, skip_connect)
from decoderlab.tensor import Tensor, no_tape

__version__ = "0.1.0"

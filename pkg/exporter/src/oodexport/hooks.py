"""Locate a model's final linear head and capture its input.

The input of the last linear layer is the penultimate feature vector the
scoring engine consumes. Rather than hard-coding an attribute path per
architecture, a probe batch runs once with hooks on every ``nn.Linear``;
the layer whose output is the model's own output is the head. Models whose
final logits are not produced by a single linear layer fail fast.
"""

from __future__ import annotations

import torch
from torch import nn


class UnsupportedArchitecture(RuntimeError):
    """No linear layer produces the model's output logits."""


class PenultimateTap:
    """Identifies the classifier head and records its flattened input."""

    def __init__(self, model: nn.Module, probe: torch.Tensor):
        self.model = model.eval()
        self.head = self._locate_head(probe)
        self._captured: torch.Tensor | None = None
        self.head.register_forward_hook(self._capture)

    def _locate_head(self, probe: torch.Tensor) -> nn.Linear:
        records: list[tuple[nn.Linear, torch.Tensor]] = []
        handles = []

        def tap(module, inputs, output):
            records.append((module, output))

        for module in self.model.modules():
            if isinstance(module, nn.Linear):
                handles.append(module.register_forward_hook(tap))
        try:
            with torch.no_grad():
                out = self.model(probe)
        finally:
            for handle in handles:
                handle.remove()
        if not isinstance(out, torch.Tensor):
            raise UnsupportedArchitecture("model output is not a single tensor")
        for module, output in reversed(records):
            if output.shape == out.shape and torch.equal(output, out):
                return module
        raise UnsupportedArchitecture(
            "no linear layer produces the model output; cannot identify a head"
        )

    def _capture(self, module, inputs, output):
        self._captured = inputs[0].detach().reshape(inputs[0].shape[0], -1)

    @torch.no_grad()
    def forward(self, batch: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Run a batch; returns (penultimate features, logits)."""
        self._captured = None
        logits = self.model(batch)
        if self._captured is None:
            raise UnsupportedArchitecture("head hook did not fire during forward")
        return self._captured, logits

    @property
    def weight(self) -> torch.Tensor:
        return self.head.weight.detach()

    @property
    def bias(self) -> torch.Tensor:
        if self.head.bias is None:
            return torch.zeros(self.head.out_features)
        return self.head.bias.detach()

"""Run a vision model over an image folder and write a scoring container.

Features come from the input of the identified linear head, weights and
bias from the head itself, and labels are the model's own argmax
predictions. Tensors are stored as f32 (the engine widens to f64 on load);
the written container is reloaded through the engine's validator before the
manifest path is returned, so a successful export is a loadable one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torchvision import models as tv_models
from torchvision import transforms

from oodscore import load_dataset
from oodscore.interchange import ClassifierHead, write_tensor

from .hooks import PenultimateTap, UnsupportedArchitecture

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png", ".bmp", ".webp")

# architectures exercised against the fidelity check; anything else in the
# torchvision zoo with a plain linear head will also work via the probe
KNOWN_MODELS = (
    "resnet18",
    "resnet50",
    "densenet121",
    "vgg16",
    "mobilenet_v2",
    "convnext_tiny",
    "vit_b_16",
)

PREPROCESS = transforms.Compose(
    [
        transforms.Resize(256),
        transforms.CenterCrop(224),
        transforms.ToTensor(),
        transforms.Normalize(
            mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]
        ),
    ]
)


class EmptyDirectory(RuntimeError):
    """The input directory holds no readable images."""


@dataclass(frozen=True)
class ExportJob:
    model: str
    image_dir: str | Path
    split: str
    out_manifest: str | Path
    batch_size: int = 32
    device: str = "cpu"
    pretrained: bool = True


def build_model(name: str, pretrained: bool = True) -> torch.nn.Module:
    factory = getattr(tv_models, name, None)
    if factory is None:
        raise UnsupportedArchitecture(f"torchvision has no model '{name}'")
    weights = "DEFAULT" if pretrained else None
    return factory(weights=weights)


def list_images(image_dir: str | Path) -> list[Path]:
    root = Path(image_dir)
    paths = sorted(
        p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    ) if root.is_dir() else []
    if not paths:
        raise EmptyDirectory(f"no images under {root}")
    return paths


def load_batch(paths: list[Path]) -> torch.Tensor:
    return torch.stack([PREPROCESS(Image.open(p).convert("RGB")) for p in paths])


def export(job: ExportJob, model: torch.nn.Module | None = None) -> Path:
    """Export one split; returns the manifest path after validation.

    When the manifest already exists (from exporting other splits of the
    same model) the new split is merged into it; the head tensors are
    rewritten, which is a no-op for the same model.
    """
    device = torch.device(job.device)
    if model is None:
        model = build_model(job.model, job.pretrained)
    model = model.to(device).eval()
    paths = list_images(job.image_dir)

    probe = load_batch(paths[: min(2, len(paths))]).to(device)
    tap = PenultimateTap(model, probe)

    features: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    for start in range(0, len(paths), job.batch_size):
        batch = load_batch(paths[start : start + job.batch_size]).to(device)
        feats, logits = tap.forward(batch)
        features.append(feats.cpu().numpy())
        labels.append(logits.argmax(dim=1).cpu().numpy())

    feature_matrix = np.concatenate(features).astype(np.float32)
    label_vector = np.concatenate(labels).astype(np.int32)
    head = ClassifierHead(  # validates shapes and finiteness before writing
        weights=tap.weight.cpu().numpy().astype(np.float64),
        bias=tap.bias.cpu().numpy().astype(np.float64),
    )
    if feature_matrix.shape[1] != head.feature_dim:
        raise UnsupportedArchitecture(
            f"captured features have dim {feature_matrix.shape[1]}, head expects "
            f"{head.feature_dim}"
        )
    if not np.isfinite(feature_matrix).all():
        raise ValueError("model produced non-finite features")

    manifest = Path(job.out_manifest)
    out_dir = manifest.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    if manifest.is_file():
        doc = json.loads(manifest.read_text())
        if (
            doc.get("feature_dim") != head.feature_dim
            or doc.get("num_classes") != head.num_classes
        ):
            raise ValueError(
                f"existing manifest at {manifest} was exported from a model with "
                f"d={doc.get('feature_dim')}, c={doc.get('num_classes')}"
            )
    else:
        doc = {
            "feature_dim": head.feature_dim,
            "num_classes": head.num_classes,
            "head": {},
            "splits": {},
        }

    write_tensor(out_dir / "head_weights.tnsr", head.weights.astype(np.float32))
    write_tensor(out_dir / "head_bias.tnsr", head.bias.astype(np.float32))
    write_tensor(out_dir / f"{job.split}_features.tnsr", feature_matrix)
    write_tensor(out_dir / f"{job.split}_labels.tnsr", label_vector)
    doc["head"] = {"weights": "head_weights.tnsr", "bias": "head_bias.tnsr"}
    doc["splits"][job.split] = {
        "features": f"{job.split}_features.tnsr",
        "labels": f"{job.split}_labels.tnsr",
    }
    manifest.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    load_dataset(manifest)  # the engine's own validation is the exit check
    return manifest

#!/usr/bin/env python3
# Copyright 2026 The DACNet Toolkit Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Export torchvision backbone weights as plain tensor dictionaries.

The C++ backbones mirror torchvision's parameter names, so a state_dict
saved with torch.save loads directly. Run this once on a machine with
network access, then point DACNET_WEIGHTS_DIR at the output directory:

    python3 scripts/export_pretrained_weights.py --out ~/.cache/dacnet/weights

With --reference the script instead writes randomly initialized weights
and a probe file holding a fixed input batch and the pooled features each
torchvision model computes for it. The test suite uses these to check the
C++ architectures against torchvision without any download.
"""

import argparse
import pathlib
import sys

KINDS = ("densenet121", "resnet50", "efficientnet_b3", "vit_base_patch16")


def build(kind, pretrained):
    import torchvision.models as tvm

    if kind == "densenet121":
        return tvm.densenet121(weights="DEFAULT" if pretrained else None)
    if kind == "resnet50":
        return tvm.resnet50(weights="DEFAULT" if pretrained else None)
    if kind == "efficientnet_b3":
        return tvm.efficientnet_b3(weights="DEFAULT" if pretrained else None)
    if kind == "vit_base_patch16":
        return tvm.vit_b_16(weights="DEFAULT" if pretrained else None)
    raise ValueError(f"unknown backbone {kind}")


def pooled_features(kind, model, x):
    import torch
    import torch.nn.functional as F

    if kind == "densenet121":
        return F.adaptive_avg_pool2d(F.relu(model.features(x)), 1).flatten(1)
    if kind == "resnet50":
        model.fc = torch.nn.Identity()
        return model(x)
    if kind == "efficientnet_b3":
        return model.avgpool(model.features(x)).flatten(1)
    model.heads = torch.nn.Identity()
    return model(x)


def perturb_norms(model, generator):
    """Random BN statistics, so the reference exercises running buffers."""
    import torch

    for m in model.modules():
        if isinstance(m, torch.nn.BatchNorm2d):
            m.running_mean.copy_(0.1 * torch.randn(m.running_mean.shape, generator=generator))
            m.running_var.copy_(0.5 + torch.rand(m.running_var.shape, generator=generator))
            m.weight.data.copy_(0.5 + torch.rand(m.weight.shape, generator=generator))
            m.bias.data.copy_(0.1 * torch.randn(m.bias.shape, generator=generator))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, type=pathlib.Path)
    parser.add_argument("--kinds", nargs="+", default=list(KINDS), choices=KINDS)
    parser.add_argument("--reference", action="store_true",
                        help="random weights plus probe features instead of pretrained weights")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    try:
        import torch
        import torchvision  # noqa: F401
    except ImportError as exc:
        print(f"torch/torchvision unavailable: {exc}", file=sys.stderr)
        return 0 if args.reference else 1

    args.out.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(args.seed)
    generator = torch.Generator().manual_seed(args.seed)
    probe = {"input": torch.randn(2, 3, 224, 224, generator=generator)}

    for kind in args.kinds:
        model = build(kind, pretrained=not args.reference).eval()
        if args.reference:
            with torch.no_grad():
                perturb_norms(model, generator)
        state = {k: v.detach().clone().contiguous() for k, v in model.state_dict().items()}
        torch.save(state, args.out / f"{kind}.pt")
        if args.reference:
            with torch.no_grad():
                probe[f"{kind}.features"] = pooled_features(kind, model, probe["input"]).contiguous()
        print(f"wrote {args.out / (kind + '.pt')}")

    if args.reference:
        torch.save(probe, args.out / "probe.pt")
    return 0


if __name__ == "__main__":
    sys.exit(main())

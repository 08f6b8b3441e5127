"""Export the VGG16 convolutional trunk to ONNX with the five stage taps as outputs.

Usage::

    python scripts/export_vgg16_onnx.py vgg16_taps.onnx            # ImageNet weights
    python scripts/export_vgg16_onnx.py vgg16_taps.onnx --weights vgg16.pth
    python scripts/export_vgg16_onnx.py random.onnx --random       # untrained, for tests

The graph outputs are named ``relu1_2 relu2_2 relu3_3 relu4_3 relu5_3``;
height and width are dynamic.
"""

import argparse

import torch
import torch.nn as nn
import torchvision

TAPS = ("relu1_2", "relu2_2", "relu3_3", "relu4_3", "relu5_3")
# index of the last ReLU of each block in torchvision's vgg16().features
TAP_INDICES = (3, 8, 15, 22, 29)


class VGG16Taps(nn.Module):
    def __init__(self, features):
        super().__init__()
        self.features = features[: TAP_INDICES[-1] + 1]

    def forward(self, x):
        outs = []
        for i, layer in enumerate(self.features):
            x = layer(x)
            if i in TAP_INDICES:
                outs.append(x)
        return tuple(outs)


def build_model(weights=None, random=False, seed=0):
    if random:
        torch.manual_seed(seed)
        vgg = torchvision.models.vgg16(weights=None)
    elif weights:
        vgg = torchvision.models.vgg16(weights=None)
        vgg.load_state_dict(torch.load(weights, map_location="cpu"))
    else:
        vgg = torchvision.models.vgg16(weights=torchvision.models.VGG16_Weights.IMAGENET1K_V1)
    # in-place ReLUs would alias the tapped tensors
    for m in vgg.features:
        if isinstance(m, nn.ReLU):
            m.inplace = False
    return VGG16Taps(vgg.features).eval()


def export(path, weights=None, random=False, seed=0):
    model = build_model(weights, random, seed)
    dummy = torch.zeros(1, 3, 64, 64)
    dynamic = {"input": {2: "height", 3: "width"}}
    dynamic.update({t: {2: f"h_{t}", 3: f"w_{t}"} for t in TAPS})
    with torch.no_grad():
        torch.onnx.export(model, dummy, str(path), input_names=["input"],
                          output_names=list(TAPS), dynamic_axes=dynamic,
                          opset_version=17, dynamo=False)
    return path


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("output")
    parser.add_argument("--weights", help="state_dict file for torchvision's vgg16")
    parser.add_argument("--random", action="store_true", help="untrained weights")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    export(args.output, args.weights, args.random, args.seed)
    print(args.output)


if __name__ == "__main__":
    main()

"""Export ImageNet-pretrained torchvision ResNet weights for `adl train --weights`.

The archive stores the backbone parameters and buffers under torchvision names
(conv1, bn1, layer1..layer4); the classification head is dropped.
"""

import argparse

import torch
import torchvision


class Backbone(torch.nn.Module):
    def __init__(self, net):
        super().__init__()
        self.conv1, self.bn1 = net.conv1, net.bn1
        self.layer1, self.layer2, self.layer3, self.layer4 = net.layer1, net.layer2, net.layer3, net.layer4

    def forward(self, x):
        x = torch.relu(self.bn1(self.conv1(x)))
        x = torch.nn.functional.max_pool2d(x, 3, 2, 1)
        return self.layer4(self.layer3(self.layer2(self.layer1(x))))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--arch", default="resnet18", choices=["resnet18", "resnet34"])
    parser.add_argument("--out", required=True)
    parser.add_argument("--random", action="store_true", help="skip the pretrained download (for tests)")
    args = parser.parse_args()

    weights = None if args.random else "DEFAULT"
    net = getattr(torchvision.models, args.arch)(weights=weights).eval()
    torch.jit.save(torch.jit.script(Backbone(net)), args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()

# Copyright 2026 The nadkit Authors
# SPDX-License-Identifier: Apache-2.0
"""Builds a torch module by interpreting the network JSON graph."""

from __future__ import annotations

import ast
import json
import operator
from functools import reduce

import torch
from torch import nn

SCHEMA_VERSION = 1


class NetworkError(ValueError):
    """Schema violation; message names the node."""

    def __init__(self, node, reason):
        self.node = node
        where = f"node {node}" if node is not None else "network"
        super().__init__(f"{where}: {reason}")


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul}


def eval_batch_expr(value, batch):
    """Ints pass through; strings are integer expressions in B."""
    if isinstance(value, bool):
        raise ValueError("boolean is not a size")
    if isinstance(value, int):
        return value
    if not isinstance(value, str):
        raise ValueError(f"bad scalar {value!r}")

    def ev(n):
        if isinstance(n, ast.Expression):
            return ev(n.body)
        if isinstance(n, ast.Constant) and isinstance(n.value, int) and not isinstance(n.value, bool):
            return n.value
        if isinstance(n, ast.Name) and n.id == "B":
            return batch
        if isinstance(n, ast.UnaryOp) and isinstance(n.op, ast.USub):
            return -ev(n.operand)
        if isinstance(n, ast.BinOp) and type(n.op) in _BINOPS:
            return _BINOPS[type(n.op)](ev(n.left), ev(n.right))
        if isinstance(n, ast.BinOp) and isinstance(n.op, ast.Div):
            a, b = ev(n.left), ev(n.right)
            if b == 0 or a % b:
                raise ValueError(f"inexact division in {value!r}")
            return a // b
        raise ValueError(f"unsupported expression {value!r}")

    return ev(ast.parse(value, mode="eval"))


def _int(args, name, node, default=None):
    v = args.get(name, default)
    if v is None:
        raise NetworkError(node, f"missing argument {name}")
    if isinstance(v, bool) or not isinstance(v, int):
        raise NetworkError(node, f"argument {name} must be an integer")
    return v


def _list(args, node):
    if len(args) != 1:
        raise NetworkError(node, "variadic op takes exactly one list argument")
    (v,) = args.values()
    if not isinstance(v, list):
        raise NetworkError(node, "variadic argument must be a list")
    return v


class _Fn(nn.Module):
    def __init__(self, fn):
        super().__init__()
        self.fn = fn

    def forward(self, *xs):
        return self.fn(*xs)


class _Sized(nn.Module):
    """permute / repeat / reshape whose sizes may mention B."""

    def __init__(self, kind, values):
        super().__init__()
        self.kind = kind
        self.values = list(values)

    def forward(self, x):
        sizes = [eval_batch_expr(v, x.shape[0]) for v in self.values]
        if self.kind == "permute":
            return x.permute(*sizes)
        if self.kind == "repeat":
            return x.repeat(*sizes)
        return x.reshape(*sizes)


def _layer(node, in_shapes):
    op, args, nid = node["op"], node.get("args", {}), node["id"]
    x = in_shapes[0] if in_shapes else None
    if op in ("input", "output"):
        return nn.Identity()
    if op == "Conv2d":
        k = _int(args, "kernel_size", nid)
        d = _int(args, "dilation", nid, 1)
        return nn.Conv2d(x[1], _int(args, "out_channels", nid), k, stride=_int(args, "stride", nid, 1),
                         padding=d * (k - 1) // 2, dilation=d, groups=_int(args, "groups", nid, 1), bias=False)
    if op == "Linear":
        return nn.Linear(x[-1], _int(args, "out_channels", nid))
    if op == "AvgPool2d":
        k = _int(args, "kernel_size", nid)
        return nn.AvgPool2d(k, stride=_int(args, "stride", nid, k))
    if op == "MaxPool2d":
        k = _int(args, "kernel_size", nid)
        return nn.MaxPool2d(k, stride=_int(args, "stride", nid, k))
    if op == "AdaptiveAvgPool2d":
        return nn.AdaptiveAvgPool2d(_int(args, "output_size", nid))
    if op == "AdaptiveMaxPool2d":
        return nn.AdaptiveMaxPool2d(_int(args, "output_size", nid))
    if op in ("Add", "Mul", "Multiply"):
        f = {"Add": operator.add, "Mul": operator.mul, "Multiply": torch.matmul}[op]
        return _Fn(lambda *xs: reduce(f, xs))
    if op == "concat":
        dim = _int(args, "dim", nid)
        return _Fn(lambda *xs: torch.cat(xs, dim=dim))
    if op in ("mean", "max", "sum"):
        dim = _int(args, "dim", nid)
        if op == "max":
            return _Fn(lambda t: t.amax(dim=dim, keepdim=True))
        f = torch.mean if op == "mean" else torch.sum
        return _Fn(lambda t: f(t, dim=dim, keepdim=True))
    if op == "softmax":
        dim = _int(args, "dim", nid)
        return nn.Softmax(dim=dim)
    if op == "ReLU":
        return nn.ReLU()
    if op == "GELU":
        return nn.GELU()
    if op == "Sigmoid":
        return nn.Sigmoid()
    if op == "BN":
        return nn.BatchNorm2d(x[1])
    if op == "LN":
        return nn.LayerNorm(x[-1])
    if op in ("permute", "repeat", "reshape"):
        return _Sized(op, _list(args, nid))
    raise NetworkError(nid, f"undefined computation {op}")


_ARITY_ONE = {"Conv2d", "Linear", "AvgPool2d", "MaxPool2d", "AdaptiveAvgPool2d", "AdaptiveMaxPool2d", "mean", "max",
              "sum", "softmax", "ReLU", "GELU", "Sigmoid", "BN", "LN", "permute", "repeat", "reshape", "output"}


class GraphNet(nn.Module):
    def __init__(self, spec):
        super().__init__()
        self.spec = spec
        nodes = spec["nodes"]
        self.inputs = [list(n["inputs"]) for n in nodes]
        self.out_shape = list(nodes[-1]["shape"])
        self.layers = nn.ModuleList(_layer(n, [nodes[i]["shape"] for i in n["inputs"]]) for n in nodes)

    def run(self, x):
        """Every node's value, in id order."""
        vals = []
        for layer, ins in zip(self.layers, self.inputs):
            vals.append(layer(x) if not ins else layer(*(vals[i] for i in ins)))
        return vals

    def forward(self, x):
        return self.run(x)[-1]


def check_network(spec):
    if not isinstance(spec, dict):
        raise NetworkError(None, "network JSON must be an object")
    if spec.get("schema_version") != SCHEMA_VERSION:
        raise NetworkError(None, f"unsupported schema_version {spec.get('schema_version')!r}")
    nodes = spec.get("nodes")
    if not isinstance(nodes, list) or len(nodes) < 2:
        raise NetworkError(None, "nodes must be a list with input and output")
    for pos, n in enumerate(nodes):
        nid = n.get("id") if isinstance(n, dict) else None
        if nid != pos:
            raise NetworkError(nid, f"ids must be 0..n-1 in order (position {pos})")
        for key in ("op", "inputs", "shape"):
            if key not in n:
                raise NetworkError(nid, f"missing field {key}")
        ins = n["inputs"]
        if any(not isinstance(i, int) or i < 0 or i >= nid for i in ins):
            raise NetworkError(nid, "inputs must name earlier nodes")
        op = n["op"]
        if (op == "input") != (not ins):
            raise NetworkError(nid, "only the input node has no inputs")
        if op in _ARITY_ONE and len(ins) != 1:
            raise NetworkError(nid, f"{op} takes one input, got {len(ins)}")
    if nodes[0]["op"] != "input" or nodes[-1]["op"] != "output":
        raise NetworkError(None, "first node must be input and last node output")
    edges = {tuple(e) for e in spec.get("edges", [])}
    implied = {(i, n["id"]) for n in nodes for i in n["inputs"]}
    if edges and edges != implied:
        bad = sorted(edges ^ implied)[0]
        raise NetworkError(bad[1], f"edge {bad[0]}->{bad[1]} disagrees with node inputs")


def build_model(network):
    """network: dict, JSON text or path."""
    if isinstance(network, (str, bytes)) and str(network).lstrip().startswith("{"):
        network = json.loads(network)
    elif not isinstance(network, dict):
        with open(network, encoding="utf-8") as f:
            network = json.load(f)
    check_network(network)
    return GraphNet(network)


def count_parameters(model):
    return sum(p.numel() for p in model.parameters())

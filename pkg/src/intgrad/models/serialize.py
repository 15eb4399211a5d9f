"""Model file format (version 1).

A UTF-8 text header, one directive per line, terminated by a ``data`` line,
followed by every parameter as little-endian float64 in declaration order::

    intgrad-model 1
    meta {"target":"score"}            # optional, one JSON object
    input <name> <d1,d2,...>
    param <name> <d1,d2,...>            # ``scalar`` for shape ()
    node <name> <op> <input>... <key>=<json>...
    output <alias> <node>
    data
    <raw parameter bytes>

Lines starting with ``#`` and blank lines in the header are ignored. Node
lines must appear in topological order; ``param`` and ``input`` lines define
nodes at their position in the file.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..autodiff import Network, Node
from ..errors import DomainError, GraphError, MalformedModelError, ModelShapeError, ModelVersionError, ShapeError

MAGIC = "intgrad-model"
VERSION = 1


def _shape_text(shape):
    return ",".join(str(int(d)) for d in shape) if len(shape) else "scalar"


def _parse_shape(text, where):
    if text == "scalar":
        return ()
    try:
        shape = tuple(int(d) for d in text.split(","))
    except ValueError:
        raise MalformedModelError(f"{where}: bad shape {text!r}") from None
    if any(d <= 0 for d in shape):
        raise ModelShapeError(f"{where}: non-positive dimension in {shape}")
    return shape


def dumps(net: Network) -> bytes:
    lines = [f"{MAGIC} {VERSION}"]
    if net.meta:
        lines.append("meta " + json.dumps(dict(net.meta), separators=(",", ":"), sort_keys=True))
    order = []
    for node in net.nodes:
        if node.op == "input":
            lines.append(f"input {node.name} {_shape_text(node.attrs['shape'])}")
        elif node.op == "param":
            lines.append(f"param {node.name} {_shape_text(net.params[node.name].shape)}")
            order.append(node.name)
        else:
            attrs = [f"{k}={json.dumps(v, separators=(',', ':'))}" for k, v in sorted(node.attrs.items())]
            lines.append(" ".join(["node", node.name, node.op, *node.inputs, *attrs]))
    lines += [f"output {alias} {target}" for alias, target in net.outputs.items()]
    lines.append("data")
    header = ("\n".join(lines) + "\n").encode("utf-8")
    blob = b"".join(np.ascontiguousarray(net.params[name], dtype="<f8").tobytes() for name in order)
    return header + blob


def loads(raw: bytes) -> Network:
    marker = b"\ndata\n"
    cut = raw.find(marker)
    if cut < 0:
        raise MalformedModelError("no 'data' line terminating the header (file truncated?)")
    try:
        header = raw[:cut].decode("utf-8").splitlines()
    except UnicodeDecodeError:
        raise MalformedModelError("header is not valid UTF-8") from None
    blob = raw[cut + len(marker) :]
    first = header[0].split() if header else []
    if len(first) != 2 or first[0] != MAGIC:
        raise MalformedModelError(f"not a model file: first line must be '{MAGIC} <version>'")
    if first[1] != str(VERSION):
        raise ModelVersionError(f"unsupported model format version {first[1]!r} (expected {VERSION})")

    nodes, outputs, param_shapes, meta = [], {}, {}, {}
    for lineno, line in enumerate(header[1:], start=2):
        where = f"line {lineno}"
        if not line.strip() or line.startswith("#"):
            continue
        keyword, _, rest = line.partition(" ")
        parts = rest.split()
        if keyword == "meta":
            try:
                meta = json.loads(rest)
            except json.JSONDecodeError as exc:
                raise MalformedModelError(f"{where}: bad meta JSON: {exc}") from None
        elif keyword in ("input", "param"):
            if len(parts) != 2:
                raise MalformedModelError(f"{where}: expected '{keyword} <name> <shape>'")
            shape = _parse_shape(parts[1], where)
            if keyword == "input":
                nodes.append(Node(parts[0], "input", (), {"shape": shape}))
            else:
                param_shapes[parts[0]] = shape
                nodes.append(Node(parts[0], "param"))
        elif keyword == "node":
            if len(parts) < 2:
                raise MalformedModelError(f"{where}: expected 'node <name> <op> ...'")
            inputs, attrs = [], {}
            for tok in parts[2:]:
                if "=" in tok:
                    key, _, value = tok.partition("=")
                    try:
                        attrs[key] = json.loads(value)
                    except json.JSONDecodeError:
                        raise MalformedModelError(f"{where}: bad attribute {tok!r}") from None
                else:
                    inputs.append(tok)
            nodes.append(Node(parts[0], parts[1], tuple(inputs), attrs))
        elif keyword == "output":
            if len(parts) != 2:
                raise MalformedModelError(f"{where}: expected 'output <alias> <node>'")
            outputs[parts[0]] = parts[1]
        else:
            raise MalformedModelError(f"{where}: unknown directive {keyword!r}")

    params, offset = {}, 0
    for name, shape in param_shapes.items():
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + 8 * count
        if end > len(blob):
            raise MalformedModelError(f"parameter data truncated while reading {name!r}")
        params[name] = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).astype(np.float64).reshape(shape)
        offset = end
    if offset != len(blob):
        raise MalformedModelError(f"{len(blob) - offset} trailing bytes after parameter data")
    try:
        return Network(nodes, params, outputs, meta)
    except (ShapeError, DomainError) as exc:
        raise ModelShapeError(f"inconsistent shapes: {exc}") from None
    except GraphError as exc:
        raise MalformedModelError(f"invalid graph: {exc}") from None


def save_model(net: Network, path) -> None:
    Path(path).write_bytes(dumps(net))


def load_model(path) -> Network:
    return loads(Path(path).read_bytes())

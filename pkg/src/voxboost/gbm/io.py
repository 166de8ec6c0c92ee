"""Flat text serialization of boosted models (format ``gbmmodel v1``).

Layout, one record per line except stages::

    gbmmodel v1
    learning_rate <real>
    n_trees <int>
    max_depth <int>
    lambda <real>
    alpha <real>
    subsample <real>
    seed <int>
    n_features <int>
    gamma <real>
    f0 <real>
    stages <count>
    rho <real> node <feat> <thr> leaf <val> ...   (one line per stage)
    end

Every real is printed with 17 significant digits, which round-trips
IEEE-754 doubles exactly.  Each stage line carries the stage weight and
the tree as a pre-order token list: ``node <feature> <threshold>`` for
internal nodes (left subtree serialized first), ``leaf <value>`` for
leaves.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import InvalidInputError, MissingArtifactError
from ..tabular import fmt_real
from .types import GbmHyperparams, GbmModel, RegressionTree

_MAGIC = "gbmmodel v1"


def _tree_tokens(tree: RegressionTree) -> list[str]:
    toks: list[str] = []

    def walk(node: int) -> None:
        if tree.feature[node] < 0:
            toks.append("leaf")
            toks.append(fmt_real(tree.value[node]))
        else:
            toks.append("node")
            toks.append(str(int(tree.feature[node])))
            toks.append(fmt_real(tree.threshold[node]))
            walk(int(tree.left[node]))
            walk(int(tree.right[node]))

    walk(0)
    return toks


def _tree_from_tokens(toks: list[str], pos: int) -> tuple[RegressionTree, int]:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def parse(pos: int) -> tuple[int, int]:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        kind = toks[pos]
        if kind == "leaf":
            value[node] = float(toks[pos + 1])
            return node, pos + 2
        if kind == "node":
            feature[node] = int(toks[pos + 1])
            threshold[node] = float(toks[pos + 2])
            l, pos = parse(pos + 3)
            r, pos = parse(pos)
            left[node] = l
            right[node] = r
            return node, pos
        raise InvalidInputError(f"bad tree token {kind!r} in model file")

    _, pos = parse(pos)
    tree = RegressionTree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
    )
    return tree, pos


def save_model(model: GbmModel, path: str | Path) -> None:
    hp = model.hyperparams
    lines = [
        _MAGIC,
        f"learning_rate {fmt_real(hp.learning_rate)}",
        f"n_trees {hp.n_trees}",
        f"max_depth {hp.max_depth}",
        f"lambda {fmt_real(hp.lam)}",
        f"alpha {fmt_real(hp.alpha)}",
        f"subsample {fmt_real(hp.subsample)}",
        f"seed {hp.seed}",
        f"n_features {model.n_features}",
        f"gamma {fmt_real(model.gamma)}",
        f"f0 {fmt_real(model.f0)}",
        f"stages {model.n_stages}",
    ]
    for tree, rho in zip(model.trees, model.rhos):
        lines.append(" ".join(["rho", fmt_real(rho)] + _tree_tokens(tree)))
    lines.append("end")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> GbmModel:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"missing model file: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != _MAGIC:
        raise InvalidInputError(f"not a {_MAGIC} file: {path}")

    fields: dict[str, str] = {}
    for idx in range(1, 12):
        key, _, val = lines[idx].partition(" ")
        fields[key] = val
    hp = GbmHyperparams(
        learning_rate=float(fields["learning_rate"]),
        n_trees=int(fields["n_trees"]),
        max_depth=int(fields["max_depth"]),
        lam=float(fields["lambda"]),
        alpha=float(fields["alpha"]),
        subsample=float(fields["subsample"]),
        seed=int(fields["seed"]),
    )
    n_stages = int(fields["stages"])
    trees: list[RegressionTree] = []
    rhos: list[float] = []
    for k in range(n_stages):
        toks = lines[12 + k].split()
        if toks[0] != "rho":
            raise InvalidInputError(f"stage line {k} malformed in {path}")
        rhos.append(float(toks[1]))
        tree, pos = _tree_from_tokens(toks, 2)
        if pos != len(toks):
            raise InvalidInputError(f"trailing tokens on stage line {k} in {path}")
        trees.append(tree)
    if lines[12 + n_stages] != "end":
        raise InvalidInputError(f"missing end marker in {path}")
    return GbmModel(f0=float(fields["f0"]), trees=trees, rhos=rhos,
                    gamma=float(fields["gamma"]), hyperparams=hp,
                    n_features=int(fields["n_features"]))

"""Minority / dominant splits and construction of the training environments.

Within each cluster the class with strictly fewer members is the minority
(conflict) side; ties contribute nothing.  The minority set is the union of
all minority cases; the balanced set adds, per cluster, as many uniformly
sampled dominant cases as that cluster has minority cases.
"""

from dataclasses import dataclass

import numpy as np

from . import colored, rng
from .cluster import ClusterAssignment
from .colored import ColoredDataset, SynthesisConfig
from .errors import LengthMismatch, NoMinorities
from .idx import RawDataset


@dataclass
class ClusterSplit:
    minority_class: list    # per cluster: 0, 1 or None on a tie
    minority: list          # per cluster: index arrays
    dominant: list


@dataclass
class EnvironmentPair:
    minority_set: np.ndarray    # D_m indices into the training dataset
    balanced_set: np.ndarray    # D_balance indices (superset of D_m)
    stats: dict


def minority_split(assignment: ClusterAssignment, labels: np.ndarray) -> ClusterSplit:
    labels = np.asarray(labels)
    if len(labels) != len(assignment.assignment):
        raise LengthMismatch(f"{len(labels)} labels vs {len(assignment.assignment)} points")
    minority_class, minority, dominant = [], [], []
    for j in range(assignment.k):
        members = np.flatnonzero(assignment.assignment == j)
        ones = int(labels[members].sum())
        zeros = len(members) - ones
        if ones == zeros:
            minority_class.append(None)
            minority.append(members[:0])
            dominant.append(members)
            continue
        mclass = 1 if ones < zeros else 0
        mask = labels[members] == mclass
        minority_class.append(mclass)
        minority.append(members[mask])
        dominant.append(members[~mask])
    return ClusterSplit(minority_class=minority_class, minority=minority, dominant=dominant)


def build_environments(split: ClusterSplit, labels: np.ndarray,
                       color_ids: np.ndarray, seed: int) -> EnvironmentPair:
    """Build (D_m, D_balance) from a per-cluster minority/dominant split."""
    if all(len(m) == 0 for m in split.minority):
        raise NoMinorities("every cluster is tied")
    gen = rng.stream(seed, "envsample")
    minority_all, sampled_dominant = [], []
    for mino, domi in zip(split.minority, split.dominant):
        if len(mino) == 0:
            continue
        minority_all.append(mino)
        take = min(len(mino), len(domi))
        sampled_dominant.append(np.sort(gen.choice(domi, size=take, replace=False)))
    d_m = np.sort(np.concatenate(minority_all))
    d_balance = np.sort(np.concatenate([d_m] + sampled_dominant))
    stats = {}
    for name, idx in (("Dm", d_m), ("Dbalance", d_balance)):
        y = np.asarray(labels)[idx]
        z = np.asarray(color_ids)[idx]
        stats[name] = {
            "size": len(idx),
            "class_balance": float(y.mean()),
            "conflict_rate": float((y != z).mean()),
        }
    return EnvironmentPair(minority_set=d_m, balanced_set=d_balance, stats=stats)


def build_handcrafted_envs(raw: RawDataset, p_list, noise_level: float,
                           seed: int) -> list:
    """One synthesized environment per p_e over disjoint equal raw slices."""
    if not p_list:
        raise ValueError("p_list must be nonempty")
    n_env = len(p_list)
    per = len(raw) // n_env
    envs = []
    for i, p in enumerate(p_list):
        sl = slice(i * per, (i + 1) * per)
        sub = RawDataset(images=raw.images[sl], digit_labels=raw.digit_labels[sl],
                         split_tag=raw.split_tag)
        cfg = SynthesisConfig(noise_level=noise_level, color_correlation=p,
                              seed=seed + i)
        ds = colored.synthesize(sub, cfg)
        ds.source_index = ds.source_index + i * per
        envs.append(ds)
    return envs


def export_environments_csv(pair: EnvironmentPair, assignment: ClusterAssignment,
                            dataset: ColoredDataset, path: str) -> None:
    balance_only = np.setdiff1d(pair.balanced_set, pair.minority_set)
    with open(path, "w") as fh:
        fh.write("instance_index,environment,cluster,y,z\n")
        for tag, idx in (("both", pair.minority_set), ("Dbalance", balance_only)):
            for i in idx:
                fh.write(f"{i},{tag},{assignment.assignment[i]},"
                         f"{dataset.labels[i]},{dataset.color_ids[i]}\n")

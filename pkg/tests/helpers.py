import numpy as np

from ctxbroadcast.linalg import projector, random_unitary
from ctxbroadcast.objects import Povm


def outer(v):
    return np.outer(v, v.conj())


def inverse_sqrt(s):
    vals, vecs = np.linalg.eigh(s)
    return vecs @ np.diag(vals**-0.5) @ vecs.conj().T


def random_rank_one_povm(dim, kind, rng, name="R"):
    """Rank-1 POVMs of four shapes: ``pvm``, ``split`` (a PVM with one ray split
    in two), ``generic`` (more outcomes than ``dim``), ``block`` (one basis
    projector plus a generic POVM on its complement)."""
    u = random_unitary(dim, rng)
    cols = [u[:, k] for k in range(dim)]
    if kind == "pvm":
        mats = [projector(c) for c in cols]
    elif kind == "split":
        w = rng.uniform(0.1, 0.9)
        mats = [w * projector(cols[0]), (1 - w) * projector(cols[0])] + [projector(c) for c in cols[1:]]
    elif kind == "generic":
        m = dim + int(rng.integers(1, 3))
        v = rng.normal(size=(dim, m)) + 1j * rng.normal(size=(dim, m))
        r = inverse_sqrt(v @ v.conj().T)
        mats = [outer(r @ v[:, k]) for k in range(m)]
    elif kind == "block":
        rest = np.stack(cols[1:], axis=1)
        m = dim
        v = rng.normal(size=(dim - 1, m)) + 1j * rng.normal(size=(dim - 1, m))
        r = inverse_sqrt(v @ v.conj().T)
        mats = [projector(cols[0])] + [outer(rest @ (r @ v[:, k])) for k in range(m)]
    else:
        raise ValueError(kind)
    return Povm.from_matrices(mats, name)


def rank_one_sample(count, seed):
    rng = np.random.default_rng(seed)
    kinds = ["pvm", "split", "generic", "block"]
    out = []
    for i in range(count):
        dim = 2 + i % 2
        kind = kinds[(i // 2) % len(kinds)]
        out.append((dim, kind, random_rank_one_povm(dim, kind, rng, f"R{i}")))
    return out

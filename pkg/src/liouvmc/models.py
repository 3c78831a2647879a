"""Dissipative transverse-field Ising chains and their vectorized Liouvillian.

A density matrix element rho_{m,n} of an N-site spin-1/2 chain is labeled by
a length-N configuration vector s with entries in {-2, -1, 1, 2}, one
4-valued label per site encoding the (ket, bra) spin pair of that site:

    s =  2  <->  (up, up)        diagonal
    s =  1  <->  (up, down)      off-diagonal
    s = -1  <->  (down, up)      off-diagonal
    s = -2  <->  (down, down)    diagonal

Sign convention: sigma_z |up> = +|up>, so basis index 0 is "up".  The
vectorization is row-major, vec index = ket_index * 2^N + bra_index, which
makes A rho B <-> (A kron B^T) vec(rho).

Both model variants share local excitation loss (jump operator
sqrt(gamma) sigma_minus on every site) and an open-boundary chain:

    zz:  H = (J/4) sum_i sz_i sz_{i+1} + (h/2) sum_i sx_i
    xx:  H = (J/4) sum_i sx_i sx_{i+1} + (h/2) sum_i sz_i

The Liouvillian acts as L = -i(H kron 1 - 1 kron H^T)
+ sum_k [A_k kron A_k* - (1/2)(1 kron (A_k^dag A_k)^T + A_k^dag A_k kron 1)].
Rows of L are generated term by term without ever storing the O(16^N)
superoperator.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, SizeLimitError

SITE_VALUES = (-2, -1, 1, 2)

# per-site (ket, bra) spin signs, +1 = up
_BRAKET = {2: (1, 1), 1: (1, -1), -1: (-1, 1), -2: (-1, -1)}
_FROM_BRAKET = {v: k for k, v in _BRAKET.items()}

# flipping the ket (bra) spin of a site, expressed on the 4-valued label
_FLIP_KET = {2: -1, 1: -2, -1: 2, -2: 1}
_FLIP_BRA = {2: 1, 1: 2, -1: -2, -2: -1}

DENSE_SITE_LIMIT = 6


@dataclass(frozen=True)
class ModelSpec:
    """One dissipative transverse-field Ising chain.

    gamma is the unit of all rates; J and h are quoted in units of gamma.
    Only open boundaries are supported: bond terms run over i = 0..N-2.
    """

    variant: str
    n_sites: int
    coupling: float = 2.0
    field: float = 1.0
    gamma: float = 1.0
    boundary: str = "open"

    def __post_init__(self):
        if self.variant not in ("zz", "xx"):
            raise DomainError(f"unknown model variant {self.variant!r}, expected 'zz' or 'xx'")
        if self.n_sites < 1:
            raise DomainError("n_sites must be >= 1")
        if not self.gamma > 0:
            raise DomainError("gamma must be > 0")
        if self.boundary != "open":
            raise DomainError("only open boundary chains are supported")


@dataclass
class LiouvillianRow:
    """All nonzero matrix elements <<s|L|s'>> for a fixed row configuration s."""

    source: np.ndarray
    entries: list  # list of (target configuration, complex amplitude)


def validate_configuration(s) -> np.ndarray:
    s = np.asarray(s, dtype=np.int8)
    if s.ndim != 1 or s.size == 0:
        raise DomainError("configuration must be a non-empty 1-d vector")
    bad = ~np.isin(s, SITE_VALUES)
    if bad.any():
        raise DomainError(f"invalid site value(s) {s[bad].tolist()}; allowed: {list(SITE_VALUES)}")
    return s


def config_to_braket(s) -> tuple[np.ndarray, np.ndarray]:
    """Split a configuration into its (ket, bra) spin strings (+1 up, -1 down)."""
    s = validate_configuration(s)
    ket = np.sign(s).astype(np.int8)
    bra = np.where(np.abs(s) == 2, ket, -ket).astype(np.int8)
    return ket, bra


def braket_to_config(ket, bra) -> np.ndarray:
    """Inverse of config_to_braket."""
    ket = np.asarray(ket, dtype=np.int8)
    bra = np.asarray(bra, dtype=np.int8)
    if ket.shape != bra.shape or ket.ndim != 1:
        raise DomainError("ket and bra strings must be 1-d and of equal length")
    if not (np.isin(ket, (-1, 1)).all() and np.isin(bra, (-1, 1)).all()):
        raise DomainError("spin strings must contain only +1 (up) and -1 (down)")
    out = np.empty(ket.shape, dtype=np.int8)
    for i in range(ket.size):
        out[i] = _FROM_BRAKET[(int(ket[i]), int(bra[i]))]
    return out


def is_diagonal(s) -> bool:
    """True iff the configuration labels a diagonal density matrix element."""
    return bool((np.abs(np.asarray(s)) == 2).all())


def config_index(s) -> int:
    """Position of configuration s in the row-major vectorization.

    index = ket_index * 2^N + bra_index, where spin strings map to integers
    with site 0 as the most significant bit and "up" as bit 0.
    """
    ket, bra = config_to_braket(s)
    n = ket.size
    ket_idx = 0
    bra_idx = 0
    for i in range(n):
        ket_idx = (ket_idx << 1) | (ket[i] < 0)
        bra_idx = (bra_idx << 1) | (bra[i] < 0)
    return ket_idx * (1 << n) + bra_idx


def index_to_config(index: int, n_sites: int) -> np.ndarray:
    dim = 1 << n_sites
    if not 0 <= index < dim * dim:
        raise DomainError(f"index {index} out of range for {n_sites} sites")
    ket_idx, bra_idx = divmod(index, dim)
    ket = np.empty(n_sites, dtype=np.int8)
    bra = np.empty(n_sites, dtype=np.int8)
    for i in range(n_sites):
        shift = n_sites - 1 - i
        ket[i] = -1 if (ket_idx >> shift) & 1 else 1
        bra[i] = -1 if (bra_idx >> shift) & 1 else 1
    return braket_to_config(ket, bra)


def all_configurations(n_sites: int) -> np.ndarray:
    """All 4^N configurations, ordered by config_index. Guarded like the dense builder."""
    if n_sites > DENSE_SITE_LIMIT:
        raise SizeLimitError(f"enumeration of 4^{n_sites} configurations refused (limit N = {DENSE_SITE_LIMIT})")
    dim = 1 << n_sites
    idx = np.arange(dim * dim)
    ket_idx, bra_idx = np.divmod(idx, dim)
    shifts = np.arange(n_sites - 1, -1, -1)
    ket_bits = (ket_idx[:, None] >> shifts[None, :]) & 1
    bra_bits = (bra_idx[:, None] >> shifts[None, :]) & 1
    ket = np.where(ket_bits == 1, -1, 1)
    bra = np.where(bra_bits == 1, -1, 1)
    # (ket, bra) -> label: (+,+)=2, (+,-)=1, (-,+)=-1, (-,-)=-2
    out = np.where(ket > 0, np.where(bra > 0, 2, 1), np.where(bra > 0, -1, -2))
    return out.astype(np.int8)


@lru_cache(maxsize=1 << 17)
def _row_arrays(model: ModelSpec, s_bytes: bytes) -> tuple[np.ndarray, np.ndarray]:
    """Cached row of L keyed by the raw configuration bytes.

    Returns (targets, amplitudes) with targets of shape (k, N).  Arrays are
    read-only; the chain and estimator hot paths share them.
    """
    s = np.frombuffer(s_bytes, dtype=np.int8)
    n = s.size
    ket, bra = config_to_braket(s)
    j_quarter = 0.25 * model.coupling
    h_half = 0.5 * model.field
    gamma = model.gamma

    acc: dict[bytes, complex] = {}

    def add(target: np.ndarray, amp: complex):
        key = target.tobytes()
        acc[key] = acc.get(key, 0.0) + amp

    diag = 0.0 + 0.0j
    if model.variant == "zz":
        for i in range(n - 1):
            diag += -1j * j_quarter * (ket[i] * ket[i + 1]) + 1j * j_quarter * (bra[i] * bra[i + 1])
        for i in range(n):
            t = s.copy()
            t[i] = _FLIP_KET[int(s[i])]
            add(t, -1j * h_half)
            t = s.copy()
            t[i] = _FLIP_BRA[int(s[i])]
            add(t, 1j * h_half)
    else:  # xx
        for i in range(n - 1):
            t = s.copy()
            t[i] = _FLIP_KET[int(s[i])]
            t[i + 1] = _FLIP_KET[int(s[i + 1])]
            add(t, -1j * j_quarter)
            t = s.copy()
            t[i] = _FLIP_BRA[int(s[i])]
            t[i + 1] = _FLIP_BRA[int(s[i + 1])]
            add(t, 1j * j_quarter)
        for i in range(n):
            diag += -1j * h_half * ket[i] + 1j * h_half * bra[i]

    # dissipators: gain sigma- kron sigma-, loss -(gamma/2)(#up kets + #up bras)
    n_up = int((ket == 1).sum() + (bra == 1).sum())
    diag += -0.5 * gamma * n_up
    for i in range(n):
        if s[i] == -2:
            t = s.copy()
            t[i] = 2
            add(t, gamma)

    add(s.copy(), diag)

    targets = []
    amps = []
    for key, amp in acc.items():
        if amp != 0:
            targets.append(np.frombuffer(key, dtype=np.int8))
            amps.append(amp)
    if targets:
        targets_arr = np.stack(targets)
    else:
        targets_arr = np.empty((0, n), dtype=np.int8)
    amps_arr = np.asarray(amps, dtype=np.complex128)
    targets_arr.setflags(write=False)
    amps_arr.setflags(write=False)
    return targets_arr, amps_arr


def liouvillian_row(model: ModelSpec, s) -> LiouvillianRow:
    """All configurations s' with <<s|L|s'>> != 0 and their exact elements.

    Commutator contributions are purely imaginary, dissipator contributions
    real; coinciding targets are merged and exact zeros dropped.  Entry count
    is O(N).
    """
    s = validate_configuration(s)
    if s.size != model.n_sites:
        raise DomainError(f"configuration has {s.size} sites, model has {model.n_sites}")
    targets, amps = _row_arrays(model, s.tobytes())
    entries = [(targets[i].copy(), complex(amps[i])) for i in range(len(amps))]
    return LiouvillianRow(source=s.copy(), entries=entries)


def row_arrays(model: ModelSpec, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Array view of liouvillian_row for batched evaluation; cached per configuration."""
    return _row_arrays(model, np.ascontiguousarray(s, dtype=np.int8).tobytes())


def build_dense_liouvillian(model: ModelSpec) -> np.ndarray:
    """Assemble the 4^N x 4^N matrix row by row from liouvillian_row.

    Only for the oracle and tests; memory is guarded at N <= 6.
    """
    n = model.n_sites
    if n > DENSE_SITE_LIMIT:
        raise SizeLimitError(f"dense Liouvillian for N = {n} refused (limit N = {DENSE_SITE_LIMIT})")
    dim = 1 << n
    size = dim * dim
    out = np.zeros((size, size), dtype=np.complex128)
    for s in all_configurations(n):
        row = config_index(s)
        targets, amps = row_arrays(model, s)
        for t, a in zip(targets, amps):
            out[row, config_index(t)] += a
    return out

"""CPC codes and Pauli-frame propagation through the decode circuit.

Propagation convention ("cross-phase-bit", the default)
-------------------------------------------------------
The decoder runs three stages in order: cross checks, then phase checks,
then bit checks. Gates inside one stage commute, so a stage maps its input
frame ``P`` to ``P xor G(P)`` where ``G`` only reads the stage input.

cross  (``M_c[j, j'] = 1``)  Z on parity j adds X on parity j', and vice versa.
phase  (``M_p[j, i] = 1``)   Z on data i adds X on parity j;
                             Z on parity j adds X on data i.
bit    (``M_b[j, i] = 1``)   X on data i adds X on parity j;
                             Z on parity j adds Z on data i.

Under this convention an X error on parity qubit j only flips syndrome bit
j and never reaches the data, so parity bit errors can be left implicit in
the Ising model. Alternative conventions are kept for comparison:
``cz-cross``, ``directed-cross`` and ``reversed-stages``.

Qubits are indexed data 0..k-1 then parity 0..n-k-1 (labels are 1-based).
Elementary error columns are ordered X_0..X_{n-1}, Z_0..Z_{n-1}.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import CapacityError, CodeValidationError, ConventionError

DEFAULT_CONVENTION = "cross-phase-bit"
CONVENTIONS = (DEFAULT_CONVENTION, "cz-cross", "directed-cross", "reversed-stages")

PAULI_CLASSES = ("I", "X", "Z", "Y")
"""Class index encodes (x bit) | (z bit) << 1."""


@dataclass(frozen=True, eq=False)
class CpcCode:
    """A CPC code given by its bit, phase and cross check matrices."""

    n: int
    k: int
    mb: np.ndarray
    mp: np.ndarray
    mc: np.ndarray
    convention: str = DEFAULT_CONVENTION
    name: str = ""

    def __post_init__(self):
        for attr in ("mb", "mp", "mc"):
            arr = np.array(getattr(self, attr))
            if arr.ndim == 1 and arr.size == 0:
                arr = arr.reshape(0, 0)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

    @property
    def r(self) -> int:
        """Number of parity qubits (syndrome length)."""
        return self.n - self.k

    def __eq__(self, other):
        if not isinstance(other, CpcCode):
            return NotImplemented
        return (
            self.n == other.n
            and self.k == other.k
            and self.convention == other.convention
            and all(
                np.array_equal(getattr(self, a), getattr(other, a))
                for a in ("mb", "mp", "mc")
            )
        )

    def __hash__(self):
        return hash((self.n, self.k, self.convention, self.mb.tobytes(), self.mp.tobytes(), self.mc.tobytes()))

    def to_dict(self) -> dict:
        d = {
            "n": self.n,
            "k": self.k,
            "mb": self.mb.astype(int).tolist(),
            "mp": self.mp.astype(int).tolist(),
            "mc": self.mc.astype(int).tolist(),
            "convention": self.convention,
        }
        if self.name:
            d = {"name": self.name, **d}
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "CpcCode":
        missing = [key for key in ("n", "k", "mb", "mp", "mc") if key not in data]
        if missing:
            raise CodeValidationError(f"code file missing field(s): {', '.join(missing)}")
        code = cls(
            n=data["n"],
            k=data["k"],
            mb=np.array(data["mb"]),
            mp=np.array(data["mp"]),
            mc=np.array(data["mc"]),
            convention=data.get("convention", DEFAULT_CONVENTION),
            name=data.get("name", ""),
        )
        validate_code(code)
        return code


def load_code(path) -> CpcCode:
    """Load a code from a JSON file, or a bundled fixture by name (``"513"``)."""
    p = Path(path)
    if not p.exists():
        stem = p.name.removesuffix(".json")
        bundled = resources.files("cpcising") / "data" / f"{stem}.json"
        if not bundled.is_file():
            raise FileNotFoundError(f"no code file {path!s} and no bundled code {stem!r}")
        return CpcCode.from_dict(json.loads(bundled.read_text()))
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise CodeValidationError(f"{path}: not valid JSON ({exc})") from exc
    return CpcCode.from_dict(data)


def dump_code(code: CpcCode) -> str:
    d = code.to_dict()
    lines = ["{"]
    items = []
    for key, value in d.items():
        if key in ("mb", "mp", "mc"):
            rows = ",\n    ".join(json.dumps(row) for row in value)
            items.append(f'  "{key}": [\n    {rows}\n  ]' if value else f'  "{key}": []')
        else:
            items.append(f"  {json.dumps(key)}: {json.dumps(value)}")
    lines.append(",\n".join(items))
    lines.append("}")
    return "\n".join(lines) + "\n"


def validate_code(code: CpcCode) -> None:
    """Raise :class:`CodeValidationError` unless every code invariant holds."""
    n, k = code.n, code.k
    if not (isinstance(n, (int, np.integer)) and isinstance(k, (int, np.integer))):
        raise CodeValidationError(f"n and k must be integers, got n={n!r}, k={k!r}")
    if not n > k >= 1:
        raise CodeValidationError(f"need n > k >= 1, got n={n}, k={k}")
    r = n - k
    for name, arr, shape in (
        ("mb", code.mb, (r, k)),
        ("mp", code.mp, (r, k)),
        ("mc", code.mc, (r, r)),
    ):
        if arr.shape != shape:
            raise CodeValidationError(f"{name} has shape {arr.shape}, expected {shape}")
        bad = np.argwhere((arr != 0) & (arr != 1))
        if bad.size:
            row, col = bad[0]
            raise CodeValidationError(
                f"{name}[{row}, {col}] = {arr[row, col].item()!r} is not binary"
            )
    diag = np.flatnonzero(np.diagonal(code.mc))
    if diag.size:
        j = diag[0]
        raise CodeValidationError(f"mc[{j}, {j}] = 1: parity qubit {j + 1} cross-checks itself")
    if code.convention not in CONVENTIONS:
        raise CodeValidationError(
            f"unknown convention {code.convention!r}; expected one of {CONVENTIONS}"
        )


@dataclass(frozen=True, eq=False)
class PauliOperator:
    """A Pauli frame on n qubits with phase ignored."""

    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.uint8) & 1
        z = np.asarray(self.z, dtype=np.uint8) & 1
        if x.shape != z.shape or x.ndim != 1:
            raise ValueError("x and z components must be 1-d vectors of equal length")
        x.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @classmethod
    def identity(cls, n: int) -> "PauliOperator":
        return cls(np.zeros(n, np.uint8), np.zeros(n, np.uint8))

    @classmethod
    def from_string(cls, s: str) -> "PauliOperator":
        s = s.upper()
        if set(s) - set("IXYZ"):
            raise ValueError(f"not a Pauli string: {s!r}")
        return cls(
            np.array([c in "XY" for c in s], np.uint8),
            np.array([c in "ZY" for c in s], np.uint8),
        )

    @classmethod
    def single(cls, n: int, qubit: int, kind: str) -> "PauliOperator":
        chars = ["I"] * n
        chars[qubit] = kind
        return cls.from_string("".join(chars))

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def weight(self) -> int:
        return int(np.count_nonzero(self.x | self.z))

    def classes(self) -> np.ndarray:
        """Per-qubit class index into :data:`PAULI_CLASSES`."""
        return (self.x | (self.z << 1)).astype(np.uint8)

    def vector(self) -> np.ndarray:
        """Concatenated (x, z) bit vector of length 2n, matching error columns."""
        return np.concatenate([self.x, self.z])

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        return PauliOperator(self.x ^ other.x, self.z ^ other.z)

    __xor__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, PauliOperator):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.z, other.z)

    def __hash__(self):
        return hash((self.x.tobytes(), self.z.tobytes()))

    def __str__(self):
        return "".join(PAULI_CLASSES[c] for c in self.classes())

    def __repr__(self):
        return f"PauliOperator('{self}')"


def _stage_cross(code, x, z, convention):
    k = code.k
    mc = code.mc.astype(np.uint8)
    if convention == "cz-cross":
        sym = mc | mc.T
        return x, z ^ np.concatenate([np.zeros(k, np.uint8), (sym @ x[k:]) & 1])
    if convention == "directed-cross":
        dx = (mc.T @ z[k:]) & 1
    else:
        dx = ((mc | mc.T) @ z[k:]) & 1
    return x ^ np.concatenate([np.zeros(k, np.uint8), dx]), z


def _stage_phase(code, x, z):
    k = code.k
    mp = code.mp.astype(np.uint8)
    dx_data = (mp.T @ z[k:]) & 1
    dx_par = (mp @ z[:k]) & 1
    return x ^ np.concatenate([dx_data, dx_par]), z


def _stage_bit(code, x, z):
    k, r = code.k, code.r
    mb = code.mb.astype(np.uint8)
    dx_par = (mb @ x[:k]) & 1
    dz_data = (mb.T @ z[k:]) & 1
    return (
        x ^ np.concatenate([np.zeros(k, np.uint8), dx_par]),
        z ^ np.concatenate([dz_data, np.zeros(r, np.uint8)]),
    )


def propagate(code: CpcCode, error: PauliOperator) -> tuple[np.ndarray, np.ndarray]:
    """Push a Pauli frame through the decode circuit.

    Returns
    -------
    syndrome : ndarray of uint8, length n-k
        Final X components on the parity qubits (1 = check fires).
    logical : ndarray of uint8, length 2k
        Final X components then Z components on the data qubits.
    """
    if error.n != code.n:
        raise ValueError(f"error acts on {error.n} qubits, code has {code.n}")
    x = error.x.astype(np.uint8).copy()
    z = error.z.astype(np.uint8).copy()
    stages = ["cross", "phase", "bit"]
    if code.convention == "reversed-stages":
        stages.reverse()
    for stage in stages:
        if stage == "cross":
            x, z = _stage_cross(code, x, z, code.convention)
        elif stage == "phase":
            x, z = _stage_phase(code, x, z)
        else:
            x, z = _stage_bit(code, x, z)
    k = code.k
    return x[k:].copy(), np.concatenate([x[:k], z[:k]])


@dataclass(frozen=True, eq=False)
class PropagationModel:
    """Linear GF(2) maps from elementary errors to syndrome bits and logical action.

    ``H`` is (n-k) x 2n and ``L`` is 2k x 2n; column c is the effect of the
    elementary error X_c (c < n) or Z_{c-n} (c >= n).
    """

    code: CpcCode
    H: np.ndarray
    L: np.ndarray

    @property
    def n(self) -> int:
        return self.code.n

    @property
    def k(self) -> int:
        return self.code.k

    @property
    def r(self) -> int:
        return self.code.r

    @property
    def num_explicit(self) -> int:
        return self.code.n + self.code.k

    @property
    def explicit_columns(self) -> np.ndarray:
        """Error-column index of each explicit variable, in spin order.

        Spin order is data-bit 1..k, data-phase 1..k, parity-phase 1..n-k.
        """
        n, k = self.n, self.k
        return np.concatenate([np.arange(k), n + np.arange(k), n + k + np.arange(n - k)])

    @property
    def explicit_labels(self) -> list[str]:
        k, r = self.k, self.r
        return (
            [f"data_bit_{i + 1}" for i in range(k)]
            + [f"data_phase_{i + 1}" for i in range(k)]
            + [f"parity_phase_{j + 1}" for j in range(r)]
        )

    def syndrome(self, error: PauliOperator) -> np.ndarray:
        return (self.H @ error.vector()) & 1

    def logical(self, error: PauliOperator) -> np.ndarray:
        return (self.L @ error.vector()) & 1

    def logical_classes(self, logical_bits: np.ndarray) -> np.ndarray:
        """Fold a length-2k (x, z) logical vector into per-qubit class indices."""
        logical_bits = np.asarray(logical_bits)
        return logical_bits[..., : self.k] | (logical_bits[..., self.k :] << 1)


def build_propagation_model(code: CpcCode) -> PropagationModel:
    """Tabulate :func:`propagate` over all 2n elementary errors and check INV-X."""
    validate_code(code)
    n, k, r = code.n, code.k, code.r
    H = np.zeros((r, 2 * n), np.uint8)
    L = np.zeros((2 * k, 2 * n), np.uint8)
    for col in range(2 * n):
        kind = "X" if col < n else "Z"
        syn, log = propagate(code, PauliOperator.single(n, col % n, kind))
        H[:, col] = syn
        L[:, col] = log
    for j in range(r):
        col = k + j
        unit = np.zeros(r, np.uint8)
        unit[j] = 1
        if not np.array_equal(H[:, col], unit) or L[:, col].any():
            raise ConventionError(
                f"X on parity qubit {j + 1} does not map to syndrome e_{j + 1} with trivial "
                f"logical action under convention {code.convention!r}",
                parity_qubit=j + 1,
            )
    H.setflags(write=False)
    L.setflags(write=False)
    return PropagationModel(code=code, H=H, L=L)


@dataclass(frozen=True)
class CheckSets:
    """Explicit variables read by each parity check.

    ``sets[j]`` holds spin indices in the explicit order (data-bit,
    data-phase, parity-phase). ``self_loop[j]`` is set when parity-phase j
    belongs to its own check.
    """

    num_explicit: int
    k: int
    sets: tuple[tuple[int, ...], ...]
    self_loop: tuple[bool, ...] = field(default=())

    @property
    def r(self) -> int:
        return len(self.sets)

    def parity_phase_spin(self, j: int) -> int:
        return 2 * self.k + j

    def membership(self) -> np.ndarray:
        """Binary (n-k) x (n+k) incidence matrix."""
        m = np.zeros((self.r, self.num_explicit), np.uint8)
        for j, q in enumerate(self.sets):
            m[j, list(q)] = 1
        return m


def derive_check_sets(model: PropagationModel) -> CheckSets:
    explicit = model.H[:, model.explicit_columns]
    sets = tuple(tuple(int(v) for v in np.flatnonzero(row)) for row in explicit)
    k = model.k
    loops = tuple(bool(explicit[j, 2 * k + j]) for j in range(model.r))
    return CheckSets(num_explicit=model.num_explicit, k=k, sets=sets, self_loop=loops)


def code_distance(model: PropagationModel, max_weight: int | None = None) -> float:
    """Minimum weight of an undetected Pauli with nontrivial logical action.

    Returns ``math.inf`` when no such error exists up to ``max_weight``
    (default n).
    """
    n = model.n
    max_weight = n if max_weight is None else max_weight
    Hx, Hz = model.H[:, :n], model.H[:, n:]
    Lx, Lz = model.L[:, :n], model.L[:, n:]
    # per qubit, columns for the three non-identity Paulis X, Z, Y
    syn_cols = [[Hx[:, q], Hz[:, q], Hx[:, q] ^ Hz[:, q]] for q in range(n)]
    log_cols = [[Lx[:, q], Lz[:, q], Lx[:, q] ^ Lz[:, q]] for q in range(n)]
    for w in range(1, max_weight + 1):
        for support in itertools.combinations(range(n), w):
            for kinds in itertools.product(range(3), repeat=w):
                s = np.zeros(model.r, np.uint8)
                lg = np.zeros(2 * model.k, np.uint8)
                for q, kind in zip(support, kinds):
                    s ^= syn_cols[q][kind]
                    lg ^= log_cols[q][kind]
                if not s.any() and lg.any():
                    return w
    return math.inf


def implied_parity_bits(checks: CheckSets, errored: np.ndarray, syndrome_bits: np.ndarray) -> np.ndarray:
    """X-error bits on parity qubits implied by explicit errors and the syndrome.

    ``errored`` is a 0/1 vector (or array of vectors) over explicit variables.
    """
    m = checks.membership()
    return (np.asarray(syndrome_bits) ^ (np.asarray(errored) @ m.T)) & 1


def pattern_from_explicit(model: PropagationModel, errored: np.ndarray, syndrome_bits: np.ndarray) -> PauliOperator:
    """Rebuild the full physical error from explicit variables and syndrome bits."""
    n, k = model.n, model.k
    errored = np.asarray(errored, np.uint8)
    vec = np.zeros(2 * n, np.uint8)
    vec[model.explicit_columns] = errored
    explicit_h = model.H[:, model.explicit_columns]
    vec[k:n] = (np.asarray(syndrome_bits, np.uint8) ^ (explicit_h @ errored)) & 1
    return PauliOperator(vec[:n], vec[n:])


MAX_ENUMERATION_QUBITS = 12


@dataclass(frozen=True)
class PatternTable:
    """Packed effect of every one of the 4^n physical error patterns.

    Pattern ``a`` carries class ``(a >> 2q) & 3`` on qubit q. ``syndrome``
    packs check j in bit j, ``logical`` packs X bits of logical qubits in
    bits 0..k-1 and Z bits in k..2k-1, ``explicit`` is the packed
    explicit-variable configuration index (bit i set = spin i errored).
    """

    n: int
    k: int
    syndrome: np.ndarray
    logical: np.ndarray
    explicit: np.ndarray

    def logical_classes(self) -> np.ndarray:
        """(4^n, k) array of logical class indices."""
        q = np.arange(self.k)
        x = (self.logical[:, None] >> q) & 1
        z = (self.logical[:, None] >> (q + self.k)) & 1
        return (x | (z << 1)).astype(np.uint8)


def _pack_columns(mat: np.ndarray) -> np.ndarray:
    weights = np.left_shift(np.uint64(1), np.arange(mat.shape[0], dtype=np.uint64))
    return (mat.astype(np.uint64) * weights[:, None]).sum(axis=0).astype(np.uint64)


def enumerate_patterns(model: PropagationModel, cap: int = MAX_ENUMERATION_QUBITS) -> PatternTable:
    n, k = model.n, model.k
    if n > cap:
        raise CapacityError(f"4^{n} pattern enumeration exceeds cap n <= {cap}; use Monte-Carlo")
    hcols = _pack_columns(model.H)
    lcols = _pack_columns(model.L)
    # explicit spin position of each error column; implied parity X bits have none
    ecols = np.zeros(2 * n, np.uint64)
    for spin, col in enumerate(model.explicit_columns):
        ecols[col] = np.uint64(1) << np.uint64(spin)
    tables = []
    for cols in (hcols, lcols, ecols):
        acc = np.zeros(1, np.uint64)
        for q in range(n):
            x, z = cols[q], cols[n + q]
            vals = np.array([0, x, z, x ^ z], np.uint64)
            # the new qubit becomes the most significant base-4 digit
            acc = (vals[:, None] ^ acc[None, :]).ravel()
        tables.append(acc.astype(np.int64))
    syn, log, exp = tables
    return PatternTable(n, k, syn, log, exp)

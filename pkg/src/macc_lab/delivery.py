"""Delivery phase: XOR multicast construction, decoding and load accounting."""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .caching import PlacedLibrary, SubfileId
from .combinatorics import CacheSubset, sub_subsets, subsets
from .errors import DecodeFailure, DemandIncomplete, TopologyMismatch, ValidationError
from .topology import CombProfile, Connectivity, UserId, build_combinatorial, membership


@dataclass(frozen=True)
class DemandVector:
    files: Mapping[UserId, int]

    @property
    def distinct(self) -> bool:
        return len(set(self.files.values())) == len(self.files)

    def __getitem__(self, user: UserId) -> int:
        return self.files[user]

    def check_covers(self, conn: Connectivity, n_files: int | None = None) -> None:
        missing = [u for u in conn.users() if u not in self.files]
        if missing:
            raise DemandIncomplete(f"no demand for users {[u.label() for u in missing]}")
        if n_files is not None:
            bad = [f for f in self.files.values() if not 1 <= f <= n_files]
            if bad:
                raise ValidationError(f"demanded file ids {bad} outside [1, {n_files}]")

    def to_json_obj(self) -> dict[str, int]:
        return {u.label(): f for u, f in self.files.items()}

    @classmethod
    def from_json_obj(cls, obj: Mapping[str, int]) -> "DemandVector":
        return cls({UserId.parse(k): int(v) for k, v in obj.items()})

    @classmethod
    def load(cls, path) -> "DemandVector":
        return cls.from_json_obj(json.loads(Path(path).read_text()))


def distinct_demand(conn: Connectivity, n_files: int, seed: int | None = None) -> DemandVector:
    """Each user asks for a different file.

    Without a seed the i-th user (canonical order) asks for file i; with a
    seed the files are a random sample of ``[1, n_files]``.
    """
    users = conn.users()
    if n_files < len(users):
        raise ValidationError(f"distinct demands need N >= K ({n_files} < {len(users)})")
    if seed is None:
        chosen = list(range(1, len(users) + 1))
    else:
        chosen = random.Random(seed).sample(range(1, n_files + 1), len(users))
    return DemandVector(dict(zip(users, chosen)))


@dataclass(frozen=True, eq=False)
class MulticastMessage:
    """One coded transmission.

    ``level``/``copy`` identify the user group a combinatorial message serves
    (``None`` for greedy messages); ``span`` is the cache set it is built on.
    """

    level: int | None
    copy: int | None
    span: CacheSubset
    payload: np.ndarray
    constituents: tuple[SubfileId, ...]


@dataclass(frozen=True, eq=False)
class TransmissionSet:
    messages: tuple[MulticastMessage, ...]
    subfile_bits: int

    @property
    def total_bits(self) -> int:
        return sum(m.payload.size * 8 for m in self.messages)

    def __len__(self) -> int:
        return len(self.messages)

    def manifest(self) -> list[dict]:
        return [
            {
                "level": m.level,
                "k": m.copy,
                "span": list(m.span),
                "constituents": [[c.file, list(c.mask)] for c in m.constituents],
                "payload_sha256": hashlib.sha256(m.payload.tobytes()).hexdigest(),
            }
            for m in self.messages
        ]

    def save(self, directory) -> None:
        """Write ``manifest.json`` plus the concatenated payloads in ``payload.bin``."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        doc = {"subfile_bits": self.subfile_bits, "messages": self.manifest()}
        (out / "manifest.json").write_text(json.dumps(doc, indent=1))
        (out / "payload.bin").write_bytes(b"".join(m.payload.tobytes() for m in self.messages))

    @classmethod
    def load(cls, directory) -> "TransmissionSet":
        src = Path(directory)
        doc = json.loads((src / "manifest.json").read_text())
        blob = np.frombuffer((src / "payload.bin").read_bytes(), dtype=np.uint8)
        step = doc["subfile_bits"] // 8
        msgs = []
        for i, entry in enumerate(doc["messages"]):
            payload = blob[i * step:(i + 1) * step].copy()
            if hashlib.sha256(payload.tobytes()).hexdigest() != entry["payload_sha256"]:
                raise ValidationError(f"payload hash mismatch for message {i}")
            msgs.append(
                MulticastMessage(
                    entry["level"],
                    entry["k"],
                    tuple(entry["span"]),
                    payload,
                    tuple(SubfileId(f, tuple(m)) for f, m in entry["constituents"]),
                )
            )
        return cls(tuple(msgs), doc["subfile_bits"])


def _xor(placed: PlacedLibrary, sids: Iterable[SubfileId]) -> np.ndarray:
    acc = np.zeros(placed.subfile_bytes, dtype=np.uint8)
    for sid in sids:
        np.bitwise_xor(acc, placed.subfile(sid), out=acc)
    return acc


def _resolve_profile(topology) -> CombProfile:
    if isinstance(topology, CombProfile):
        return topology
    info = membership(topology)
    if not info.is_combinatorial:
        raise TopologyMismatch("connectivity is not a generalized combinatorial topology")
    return info.profile


def comb_deliver(placed: PlacedLibrary, topology, demand: DemandVector) -> TransmissionSet:
    """Combinatorial-topology delivery.

    For every level ``lam <= L - t``, copy ``k`` and ``(t + lam)``-subset
    ``S``, send the XOR over all ``lam``-subsets ``U`` of ``S`` of the piece
    ``S minus U`` of the file wanted by user ``U_k``. Users on more than
    ``L - t`` caches already see the whole library and get nothing.
    """
    profile = _resolve_profile(topology)
    if profile.caches != placed.caches:
        raise TopologyMismatch(f"profile has {profile.caches} caches, placement has {placed.caches}")
    demand.check_covers(build_combinatorial(profile), placed.library.files)
    t, caches = placed.t, placed.caches
    msgs = []
    for lam in range(0, caches - t + 1):
        for k in range(1, profile.per_level[lam] + 1):
            for span in subsets(caches, t + lam):
                parts = tuple(
                    SubfileId(demand[UserId(u, k)], tuple(c for c in span if c not in u))
                    for u in sub_subsets(span, lam)
                )
                msgs.append(MulticastMessage(lam, k, span, _xor(placed, parts), parts))
    return TransmissionSet(tuple(msgs), placed.subfile_bits)


def measured_load(tx: TransmissionSet, file_bits: int) -> Fraction:
    return Fraction(tx.total_bits, file_bits)


def _wanted(placed: PlacedLibrary, user: UserId, demand: DemandVector) -> list[SubfileId]:
    f = demand[user]
    return [SubfileId(f, m) for m in placed.masks]


@dataclass(frozen=True)
class DecodeResult:
    data: bytes
    messages_used: int


def decode_report(
    placed: PlacedLibrary, user: UserId, demand: DemandVector, tx: TransmissionSet
) -> DecodeResult:
    """Recover the user's file by explicit interference cancellation.

    A message is usable once all but one of its constituents are known
    (cached or recovered earlier); XOR-ing the known ones out of the payload
    yields the remaining piece. Passes repeat until nothing new is learned.
    """
    own = set(user.caches)
    recovered: dict[SubfileId, np.ndarray] = {}

    def cached(sid: SubfileId) -> bool:
        return bool(own.intersection(sid.mask))

    wanted = [s for s in _wanted(placed, user, demand) if not cached(s)]
    outstanding = set(wanted)
    used = 0
    pending = list(tx.messages)
    while outstanding and pending:
        progress = False
        remaining = []
        for msg in pending:
            unknown = [c for c in msg.constituents if not cached(c) and c not in recovered]
            if len(unknown) == 1:
                acc = msg.payload.copy()
                for c in msg.constituents:
                    if c != unknown[0]:
                        np.bitwise_xor(acc, recovered[c] if c in recovered else placed.subfile(c), out=acc)
                recovered[unknown[0]] = acc
                outstanding.discard(unknown[0])
                used += 1
                progress = True
            elif unknown:
                remaining.append(msg)
        pending = remaining
        if not progress:
            break
    if outstanding:
        raise DecodeFailure(min(outstanding))
    chunks = [
        placed.subfile(s).tobytes() if cached(s) else recovered[s].tobytes()
        for s in _wanted(placed, user, demand)
    ]
    return DecodeResult(b"".join(chunks), used)


def decode(placed: PlacedLibrary, user: UserId, demand: DemandVector, tx: TransmissionSet) -> bytes:
    return decode_report(placed, user, demand, tx).data


def verify_all(
    placed: PlacedLibrary, conn: Connectivity, demand: DemandVector, tx: TransmissionSet
) -> list[str]:
    """Decode for every user; return labels of users that failed (empty on success)."""
    failed = []
    for user in conn.users():
        try:
            ok = decode(placed, user, demand, tx) == placed.library.file(demand[user])
        except DecodeFailure:
            ok = False
        if not ok:
            failed.append(user.label())
    return failed


def greedy_deliver(placed: PlacedLibrary, conn: Connectivity, demand: DemandVector) -> TransmissionSet:
    """Heuristic clique-cover delivery for an arbitrary connectivity.

    Missing pieces are visited in ascending ``SubfileId`` order; each message
    starts at the first unserved piece and absorbs, in order, every further
    piece that all requesters of the current group can cancel (and whose own
    requesters can cancel the group). A piece wanted by several users is sent
    once.
    """
    demand.check_covers(conn, placed.library.files)
    requesters: dict[SubfileId, set[CacheSubset]] = {}
    for user in conn.users():
        own = set(user.caches)
        for m in placed.masks:
            if not own.intersection(m):
                requesters.setdefault(SubfileId(demand[user], m), set()).add(user.caches)
    order = sorted(requesters)

    def has(holders: set[CacheSubset], sid: SubfileId) -> bool:
        return all(set(h).intersection(sid.mask) for h in holders)

    msgs = []
    left = order
    while left:
        group = [left[0]]
        rest = []
        for sid in left[1:]:
            if all(has(requesters[g], sid) and has(requesters[sid], g) for g in group):
                group.append(sid)
            else:
                rest.append(sid)
        span = tuple(sorted({c for g in group for c in g.mask}))
        msgs.append(MulticastMessage(None, None, span, _xor(placed, group), tuple(group)))
        left = rest
    return TransmissionSet(tuple(msgs), placed.subfile_bits)


def corrupt(tx: TransmissionSet, placed: PlacedLibrary, seed: int) -> TransmissionSet:
    """Fault injection: drop one constituent from one coded payload.

    The manifest still lists the dropped piece, so whoever decodes through
    that message recovers garbage.
    """
    coded = [i for i, m in enumerate(tx.messages) if len(m.constituents) > 1] or list(
        range(len(tx.messages))
    )
    if not coded:
        return tx
    rng = random.Random(seed)
    i = rng.choice(coded)
    msg = tx.messages[i]
    j = rng.randrange(len(msg.constituents))
    kept = [c for n, c in enumerate(msg.constituents) if n != j]
    payload = _xor(placed, kept)
    if np.array_equal(payload, msg.payload):
        # dropped piece was all zeros; flip bits so the fault stays observable
        payload = payload ^ np.uint8(0xFF)
    bad = MulticastMessage(msg.level, msg.copy, msg.span, payload, msg.constituents)
    return TransmissionSet(tx.messages[:i] + (bad,) + tx.messages[i + 1:], tx.subfile_bits)

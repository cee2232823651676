"""Core data types, log ingestion, and synthetic instance generation.

An *instance* is the triple (Catalog, TrafficSeries, requests): an immutable
item universe, per-interval arrival counts, and the ordered stream of user
requests with dense relevance vectors.
"""

from __future__ import annotations

import csv
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, ConsistencyError, ParseError

logger = logging.getLogger(__name__)

INTERACTIONS_FILE = "interactions.csv"
CATALOG_FILE = "catalog.csv"
RELEVANCE_FILE = "relevance.bin"
INTERACTIONS_COLUMNS = ("user_id", "item_id", "provider_id", "timestamp", "score")

# Dense relevance sidecar: 16-byte header = 4-byte magic + three uint32
# (num_users, num_items, element width in bytes), then row-major floats.
RELEVANCE_MAGIC = b"BFRM"
_HEADER = struct.Struct("<4sIII")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Catalog:
    """Immutable item universe: the provider owning each item.

    ``item_provider[i]`` is the provider index of item ``i``; every item
    belongs to exactly one provider by construction.
    """

    item_provider: np.ndarray
    num_providers: int = 0  # inferred from item_provider when left at 0

    def __post_init__(self):
        ip = np.asarray(self.item_provider, dtype=np.int64)
        if ip.ndim != 1 or ip.size == 0:
            raise ConfigError("catalog needs a 1-d, nonempty item->provider map")
        inferred = int(ip.max()) + 1
        nprov = self.num_providers or inferred
        if nprov < inferred or ip.min() < 0:
            raise ConfigError("provider index out of range")
        if nprov < 1 or ip.size < nprov:
            raise ConfigError("need at least one provider and num_items >= num_providers")
        object.__setattr__(self, "item_provider", _readonly(ip))
        object.__setattr__(self, "num_providers", nprov)
        inv = np.bincount(ip, minlength=nprov)
        object.__setattr__(self, "_inventory", _readonly(inv))

    @property
    def num_items(self) -> int:
        return int(self.item_provider.size)

    @property
    def inventory(self) -> np.ndarray:
        """Items per provider; sums to num_items."""
        return self._inventory

    def provider_matrix(self) -> np.ndarray:
        """One-hot (num_items, num_providers) membership matrix."""
        a = np.zeros((self.num_items, self.num_providers))
        a[np.arange(self.num_items), self.item_provider] = 1.0
        return a

    def exposure_of(self, items: np.ndarray) -> np.ndarray:
        """Per-provider exposure counts of a list of item ids."""
        return np.bincount(self.item_provider[np.asarray(items)], minlength=self.num_providers)


@dataclass(frozen=True)
class TrafficSeries:
    """Per-interval arrival counts over the whole horizon."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 1 or c.size == 0:
            raise ConfigError("traffic series must be 1-d and nonempty")
        if (c < 0).any():
            raise ConfigError("traffic counts must be nonnegative")
        object.__setattr__(self, "counts", _readonly(c))

    @property
    def horizon(self) -> int:
        return int(self.counts.size)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class FairnessPolicy:
    """Per-provider exposure floors plus the per-user accuracy floor."""

    required_min_exposure: np.ndarray
    required_min_accuracy: float
    list_size: int

    def __post_init__(self):
        m = np.asarray(self.required_min_exposure, dtype=float)
        if (m < 0).any() or not np.isfinite(m).all():
            raise ConfigError("required minimum exposure must be finite and >= 0")
        if not 0.0 <= self.required_min_accuracy <= 1.0:
            raise ConfigError("required minimum accuracy must lie in [0, 1]")
        if self.list_size < 1:
            raise ConfigError("list size must be >= 1")
        object.__setattr__(self, "required_min_exposure", _readonly(m))

    @classmethod
    def uniform(cls, m: float, num_providers: int, phi: float, k: int) -> "FairnessPolicy":
        return cls(np.full(num_providers, float(m)), phi, k)


@dataclass
class UserRequest:
    """One user arrival with a dense relevance vector over all items."""

    user_id: str
    interval: int  # 1-based interval index
    arrival_seq: int  # 1-based position within the interval
    relevance: np.ndarray
    degenerate: bool = False  # fewer strictly positive scores than the list size

    def validate(self):
        r = self.relevance
        if not np.isfinite(r).all() or (r < 0).any() or (r > 1).any():
            raise ConfigError(f"request {self.user_id}: relevance outside [0, 1]")


@dataclass(frozen=True)
class RankedList:
    """An ordered top-K list with the raw relevance of each slot."""

    items: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        items = np.asarray(self.items, dtype=np.int64)
        if items.size != np.unique(items).size:
            raise ConfigError("ranked list has duplicate items")
        object.__setattr__(self, "items", _readonly(items))
        object.__setattr__(self, "scores", _readonly(np.asarray(self.scores, dtype=float)))


def _flag_degenerate(relevance: np.ndarray, list_size: int) -> bool:
    return int((relevance > 0).sum()) < list_size


# ---------------------------------------------------------------------------
# Synthetic instances
# ---------------------------------------------------------------------------


@dataclass
class SynthConfig:
    """Generator knobs for synthetic instances.

    ``traffic`` pins exact per-interval counts; otherwise counts are Poisson
    with the given mean. ``provider_weights`` scales item relevance per
    provider ("zipf" gives 1/rank popularity, a list gives explicit weights);
    ``provider_bands`` instead draws each provider's item scores uniformly
    from its own (low, high) band, which makes popularity tiers with
    controlled gaps easy to set up. ``inventory`` is "even" or an explicit
    per-provider item count.
    """

    num_items: int
    num_providers: int
    num_intervals: int
    mean_traffic: float = 50.0
    traffic: Sequence[int] | None = None
    list_size: int = 10
    relevance_low: float = 0.0
    relevance_high: float = 1.0
    provider_weights: Sequence[float] | str | None = None
    provider_bands: Sequence[Sequence[float]] | None = None
    inventory: Sequence[int] | str = "even"

    def resolve_inventory(self) -> np.ndarray:
        if isinstance(self.inventory, str):
            if self.inventory != "even":
                raise ConfigError(f"unknown inventory spec {self.inventory!r}")
            base, extra = divmod(self.num_items, self.num_providers)
            inv = np.full(self.num_providers, base, dtype=np.int64)
            inv[:extra] += 1
            return inv
        inv = np.asarray(self.inventory, dtype=np.int64)
        if inv.size != self.num_providers or inv.sum() != self.num_items:
            raise ConfigError("explicit inventory must cover all items")
        return inv

    def resolve_weights(self) -> np.ndarray:
        if self.provider_weights is None:
            return np.ones(self.num_providers)
        if isinstance(self.provider_weights, str):
            if self.provider_weights != "zipf":
                raise ConfigError(f"unknown provider weights {self.provider_weights!r}")
            return 1.0 / np.arange(1, self.num_providers + 1)
        w = np.asarray(self.provider_weights, dtype=float)
        if w.size != self.num_providers or (w <= 0).any():
            raise ConfigError("provider weights must be positive, one per provider")
        return w


def synth_instance(cfg: SynthConfig, seed: int):
    """Generate a deterministic (Catalog, TrafficSeries, requests) triple."""
    if cfg.num_providers > cfg.num_items:
        raise ConfigError("more providers than items")
    rng = np.random.default_rng(seed)

    inv = cfg.resolve_inventory()
    item_provider = np.repeat(np.arange(cfg.num_providers), inv)
    catalog = Catalog(item_provider, cfg.num_providers)

    if cfg.traffic is not None:
        counts = np.asarray(cfg.traffic, dtype=np.int64)
        if counts.size != cfg.num_intervals:
            raise ConfigError("explicit traffic length must equal the horizon")
    else:
        counts = rng.poisson(cfg.mean_traffic, size=cfg.num_intervals)
    series = TrafficSeries(counts)

    if cfg.provider_bands is not None:
        bands = np.asarray(cfg.provider_bands, dtype=float)
        if bands.shape != (cfg.num_providers, 2) or (bands < 0).any() or (bands > 1).any():
            raise ConfigError("provider_bands must be one (low, high) pair in [0,1] per provider")
        lo = bands[item_provider, 0]
        hi = bands[item_provider, 1]
        weights = np.ones(cfg.num_items)
    else:
        lo, hi = cfg.relevance_low, cfg.relevance_high
        weights = cfg.resolve_weights()[item_provider]
    requests = []
    uid = 0
    for n, c in enumerate(series.counts, start=1):
        for t in range(1, int(c) + 1):
            rel = np.clip(rng.uniform(lo, hi, size=cfg.num_items) * weights, 0.0, 1.0)
            requests.append(
                UserRequest(
                    user_id=str(uid),
                    interval=n,
                    arrival_seq=t,
                    relevance=rel,
                    degenerate=_flag_degenerate(rel, cfg.list_size),
                )
            )
            uid += 1
    return catalog, series, requests


# ---------------------------------------------------------------------------
# Traffic resampling
# ---------------------------------------------------------------------------


def resample_traffic(series: TrafficSeries, tau: float, total: int, seed: int) -> TrafficSeries:
    """Redistribute ``total`` arrivals across intervals with temperature tau.

    Interval probabilities are softmax(counts / (tau * max(counts))); the max
    normalization keeps tau in (0, 1] meaningful for raw counts of any scale.
    Small tau concentrates arrivals on the busiest intervals, tau = 1 tends
    toward the softmax of the normalized counts.
    """
    if tau <= 0:
        raise ConfigError("tau must be positive")
    if total <= 0:
        raise ConfigError("total must be positive")
    counts = series.counts.astype(float)
    scale = counts.max()
    if scale <= 0:
        scale = 1.0
    logits = counts / (tau * scale)
    logits -= logits.max()
    probs = np.exp(logits)
    probs /= probs.sum()
    rng = np.random.default_rng(seed)
    return TrafficSeries(rng.multinomial(total, probs))


def redistribute_requests(requests: Sequence[UserRequest], series: TrafficSeries, seed: int):
    """Deal the pooled requests into intervals sized by ``series``.

    Used after resampling: the request pool is shuffled once (seeded) and cut
    sequentially, then intervals and arrival positions are relabeled.
    """
    if series.total != len(requests):
        raise ConfigError("resampled counts must sum to the number of requests")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(requests))
    out = []
    cursor = 0
    for n, c in enumerate(series.counts, start=1):
        for t in range(1, int(c) + 1):
            src = requests[order[cursor]]
            out.append(
                UserRequest(
                    user_id=src.user_id,
                    interval=n,
                    arrival_seq=t,
                    relevance=src.relevance,
                    degenerate=src.degenerate,
                )
            )
            cursor += 1
    return out


# ---------------------------------------------------------------------------
# Interchange format
# ---------------------------------------------------------------------------


@dataclass
class LogSchema:
    """How to read an interaction log directory or file."""

    interval_seconds: float = 86400.0
    list_size: int = 10
    columns: Sequence[str] = INTERACTIONS_COLUMNS
    relevance_path: str | None = None
    catalog_path: str | None = None


def _write_relevance_matrix(path: Path, matrix: np.ndarray):
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(RELEVANCE_MAGIC, matrix.shape[0], matrix.shape[1], 8))
        fh.write(matrix.tobytes())


def _read_relevance_matrix(path: Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ParseError(f"{path}: truncated relevance file")
    magic, nu, ni, width = _HEADER.unpack_from(raw)
    if magic != RELEVANCE_MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}")
    if width not in (4, 8):
        raise ParseError(f"{path}: unsupported element width {width}")
    dtype = np.float32 if width == 4 else np.float64
    body = np.frombuffer(raw, dtype=dtype, offset=_HEADER.size)
    if body.size != nu * ni:
        raise ParseError(f"{path}: payload size does not match header")
    return body.reshape(nu, ni).astype(np.float64)


def save_instance(directory, catalog: Catalog, series: TrafficSeries,
                  requests: Sequence[UserRequest], interval_seconds: float = 86400.0):
    """Write an instance in the interchange layout.

    Emits interactions.csv (one row per arrival; the row's item is the
    request's top-relevance item), catalog.csv with the full item->provider
    map, and relevance.bin with one dense row per distinct user in order of
    first appearance. Timestamps encode (interval, arrival_seq) so reloading
    reconstructs the original grouping exactly.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    with open(directory / CATALOG_FILE, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["item_id", "provider_id"])
        for i, p in enumerate(catalog.item_provider):
            w.writerow([i, int(p)])

    user_rows: dict[str, int] = {}
    matrix_rows = []
    with open(directory / INTERACTIONS_FILE, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(INTERACTIONS_COLUMNS)
        for req in requests:
            if req.user_id not in user_rows:
                user_rows[req.user_id] = len(matrix_rows)
                matrix_rows.append(req.relevance)
            ts = (req.interval - 1) * interval_seconds + (req.arrival_seq - 1)
            top = int(np.lexsort((np.arange(req.relevance.size), -req.relevance))[0])
            w.writerow([req.user_id, top, int(catalog.item_provider[top]),
                        repr(float(ts)), repr(float(req.relevance[top]))])

    _write_relevance_matrix(directory / RELEVANCE_FILE, np.asarray(matrix_rows))


def _parse_row(row: dict, lineno: int):
    try:
        return (row["user_id"], row["item_id"], row["provider_id"],
                float(row["timestamp"]), float(row["score"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"row {lineno}: malformed record ({exc})") from None


def load_interactions(path, schema: LogSchema | None = None):
    """Load an interaction log into (Catalog, TrafficSeries, requests).

    ``path`` may be the interchange directory or a bare csv file. With the
    dense relevance sidecar each user's vector comes from their matrix row;
    otherwise a user's relevance profile is assembled from their own logged
    scores (last occurrence wins) and all other items score 0. Requests are
    grouped into fixed-width intervals starting at the earliest timestamp.
    """
    schema = schema or LogSchema()
    path = Path(path)
    if path.is_dir():
        csv_path = path / INTERACTIONS_FILE
        cat_path = path / CATALOG_FILE if (path / CATALOG_FILE).exists() else None
        rel_path = path / RELEVANCE_FILE if (path / RELEVANCE_FILE).exists() else None
    else:
        csv_path = path
        cat_path = Path(schema.catalog_path) if schema.catalog_path else None
        rel_path = Path(schema.relevance_path) if schema.relevance_path else None

    rows = []
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(schema.columns) - set(reader.fieldnames):
            raise ParseError(f"{csv_path}: header must contain {','.join(schema.columns)}")
        for lineno, row in enumerate(reader, start=2):
            rows.append(_parse_row(row, lineno))
    if not rows:
        raise ParseError(f"{csv_path}: no requests")

    # Item and provider universes; explicit catalog wins over observed pairs.
    if cat_path is not None:
        item_ids, providers = [], []
        with open(cat_path, newline="") as fh:
            for lineno, row in enumerate(csv.DictReader(fh), start=2):
                try:
                    item_ids.append(row["item_id"])
                    providers.append(int(row["provider_id"]))
                except (KeyError, TypeError, ValueError) as exc:
                    raise ParseError(f"{cat_path} row {lineno}: {exc}") from None
        item_index = {iid: k for k, iid in enumerate(item_ids)}
        item_provider = np.asarray(providers, dtype=np.int64)
    else:
        item_index, provider_index, item_provider_list = {}, {}, []
        for lineno, (_, iid, pid, _, _) in enumerate(rows, start=2):
            p = provider_index.setdefault(pid, len(provider_index))
            if iid in item_index:
                if item_provider_list[item_index[iid]] != p:
                    raise ConsistencyError(f"row {lineno}: item {iid!r} listed under two providers")
            else:
                item_index[iid] = len(item_provider_list)
                item_provider_list.append(p)
        item_provider = np.asarray(item_provider_list, dtype=np.int64)
    catalog = Catalog(item_provider)
    num_items = catalog.num_items

    # Per-user relevance vectors.
    user_order: dict[str, int] = {}
    for uid, *_ in rows:
        user_order.setdefault(uid, len(user_order))
    if rel_path is not None:
        matrix = _read_relevance_matrix(rel_path)
        if matrix.shape != (len(user_order), num_items):
            raise ParseError(f"{rel_path}: matrix shape {matrix.shape} does not match "
                             f"{len(user_order)} users x {num_items} items")
        relevance_of = lambda uid: matrix[user_order[uid]]
    else:
        profiles = {uid: np.zeros(num_items) for uid in user_order}
        for uid, iid, _, _, score in rows:
            if iid in item_index:
                profiles[uid][item_index[iid]] = score
        relevance_of = lambda uid: profiles[uid]

    # Interval grouping by timestamp, stable within equal timestamps.
    t0 = min(r[3] for r in rows)
    ordered = sorted(range(len(rows)), key=lambda k: (rows[k][3], k))
    horizon = int((max(r[3] for r in rows) - t0) // schema.interval_seconds) + 1
    counts = np.zeros(horizon, dtype=np.int64)
    requests = []
    for k in ordered:
        uid, _, _, ts, _ = rows[k]
        n = int((ts - t0) // schema.interval_seconds) + 1
        counts[n - 1] += 1
        rel = relevance_of(uid)
        requests.append(
            UserRequest(
                user_id=uid,
                interval=n,
                arrival_seq=int(counts[n - 1]),
                relevance=rel,
                degenerate=_flag_degenerate(rel, schema.list_size),
            )
        )
    return catalog, TrafficSeries(counts), requests

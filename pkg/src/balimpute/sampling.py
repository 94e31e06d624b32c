"""Sampling designs: pi-ps inclusion probabilities, SRSWOR, rejective sampling.

The unequal-probability design takes pi_k proportional to a positive size
variable, capped at 1 iteratively: units whose proportional probability
reaches 1 are taken with certainty and the remaining budget is respread over
the rest.  Sampling itself is rejective (conditional Poisson): independent
Bernoulli(pi_k) draws repeated until the realized size hits the target.
"""

import csv
from dataclasses import dataclass, replace

import numpy as np
import numpy.typing as npt

MAX_REJECTIVE_ATTEMPTS = 1_000_000


@dataclass(frozen=True)
class SampleData:
    """A drawn sample: population indices, inclusion probs, design weights.

    ``respond`` is None until a response mechanism has been applied.
    Invariant: d == 1/pi elementwise, exactly.
    """

    indices: npt.NDArray[np.int64]
    pi: npt.NDArray[np.float64]
    d: npt.NDArray[np.float64]
    respond: npt.NDArray[np.bool_] | None = None

    def __post_init__(self):
        if self.indices.shape != self.pi.shape or self.pi.shape != self.d.shape:
            raise ValueError("indices, pi, d must share a shape")
        if np.any(self.pi <= 0) or np.any(self.pi > 1):
            raise ValueError("inclusion probabilities must lie in (0, 1]")
        if not np.array_equal(self.d, 1.0 / self.pi):
            raise ValueError("design weights must equal 1/pi exactly")
        if self.respond is not None and self.respond.shape != self.indices.shape:
            raise ValueError("respond must match sample size")

    @property
    def size(self) -> int:
        return self.indices.shape[0]

    def with_response(self, respond: npt.NDArray[np.bool_]) -> "SampleData":
        return replace(self, respond=np.asarray(respond, dtype=bool))


def _sample_from(indices: npt.NDArray[np.int64], pi_all: npt.NDArray[np.float64]) -> SampleData:
    idx = np.sort(np.asarray(indices, dtype=np.int64))
    pi = pi_all[idx].copy()
    return SampleData(indices=idx, pi=pi, d=1.0 / pi)


def pips_probabilities(z1: npt.NDArray[np.float64], n: int) -> npt.NDArray[np.float64]:
    """Inclusion probabilities proportional to size, iteratively capped at 1.

    Postconditions: every pi_k in (0, 1], sum(pi) == n within 1e-9, and the
    uncapped entries stay proportional to z1.
    """
    z1 = np.asarray(z1, dtype=np.float64)
    if z1.ndim != 1 or z1.size == 0:
        raise ValueError("z1 must be a nonempty vector")
    if not np.all(np.isfinite(z1)) or np.any(z1 <= 0):
        raise ValueError("sizes must be finite and strictly positive")
    n = int(n)
    if not 0 < n <= z1.size:
        raise ValueError(f"need 0 < n <= {z1.size}, got {n}")

    pi = np.empty_like(z1)
    capped = np.zeros(z1.size, dtype=bool)
    while True:
        budget = n - int(capped.sum())
        rest = ~capped
        if budget == 0:
            pi[rest] = 0.0
            break
        pi[rest] = budget * z1[rest] / z1[rest].sum()
        newly = rest & (pi >= 1.0)
        if not newly.any():
            break
        pi[newly] = 1.0
        capped |= newly
    if np.any(pi <= 0):
        # budget exhausted by capped units; remaining units would need pi = 0
        raise ValueError("capping exhausted the sample size; n too small for these sizes")
    return pi


def srswor(n_population: int, n: int, rng: np.random.Generator) -> SampleData:
    """Simple random sample without replacement; pi = n/N for every unit."""
    if not 0 < n <= n_population:
        raise ValueError(f"need 0 < n <= {n_population}, got {n}")
    idx = rng.choice(n_population, size=n, replace=False)
    pi_all = np.full(n_population, n / n_population)
    return _sample_from(idx, pi_all)


def rejective_sample(pi: npt.NDArray[np.float64], rng: np.random.Generator) -> SampleData:
    """Conditional Poisson sample of fixed size sum(pi).

    Draws independent Bernoulli(pi_k) and rejects until the realized size
    equals round(sum(pi)); the expected number of attempts is O(sqrt(n)).
    """
    pi = np.asarray(pi, dtype=np.float64)
    if np.any(pi <= 0) or np.any(pi > 1):
        raise ValueError("inclusion probabilities must lie in (0, 1]")
    n_target = round(float(pi.sum()))
    if abs(pi.sum() - n_target) > 1e-9:
        raise ValueError(f"sum(pi) = {pi.sum()!r} is not integral")
    for _ in range(MAX_REJECTIVE_ATTEMPTS):
        mask = rng.random(pi.size) < pi
        if int(mask.sum()) == n_target:
            return _sample_from(np.flatnonzero(mask), pi)
    raise RuntimeError("rejective sampling did not reach the target size")


# ---------------------------------------------------------------------------
# CSV round-trip (carries the unit data along so imputation can run from file)


SAMPLE_FIELDS = ("id", "y", "z1", "v", "pi", "d", "r")


def sample_to_csv(
    path,
    sample: SampleData,
    y: npt.NDArray[np.float64],
    z1: npt.NDArray[np.float64],
    v: npt.NDArray[np.float64],
) -> None:
    """Columns (id, y, z1, v, pi, d, r); y is left empty where missing."""
    respond = sample.respond if sample.respond is not None else np.isfinite(y)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SAMPLE_FIELDS)
        for i in range(sample.size):
            yv = "" if not respond[i] else repr(float(y[i]))
            w.writerow([int(sample.indices[i]) + 1, yv, repr(float(z1[i])),
                        repr(float(v[i])), repr(float(sample.pi[i])),
                        repr(float(sample.d[i])), int(respond[i])])


def sample_from_csv(path):
    """Returns (SampleData with respond set, y with NaN at nonrespondents, z1, v)."""
    ids, ys, z1s, vs, pis, rs = [], [], [], [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(SAMPLE_FIELDS) <= set(reader.fieldnames):
            raise ValueError(f"sample CSV needs columns {SAMPLE_FIELDS}")
        for lineno, row in enumerate(reader, start=2):
            try:
                r = bool(int(row["r"]))
                yraw = (row["y"] or "").strip()
                yv = float(yraw) if yraw else np.nan
                if r and not np.isfinite(yv):
                    raise ValueError("respondent without a y value")
                ids.append(int(row["id"]) - 1)
                ys.append(yv)
                z1s.append(float(row["z1"]))
                vs.append(float(row["v"]))
                pis.append(float(row["pi"]))
                rs.append(r)
            except (TypeError, ValueError) as exc:
                raise ValueError(f"bad sample row at line {lineno}: {exc}") from exc
    pi = np.array(pis)
    sample = SampleData(
        indices=np.array(ids, dtype=np.int64),
        pi=pi,
        d=1.0 / pi,
        respond=np.array(rs, dtype=bool),
    )
    return sample, np.array(ys), np.array(z1s), np.array(vs)

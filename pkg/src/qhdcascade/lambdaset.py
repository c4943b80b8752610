"""Generation sets of lattice frequencies linked by rectangle families.

A family (n1, n2, n3, n4) has parents n1, n3 in generation i and children
n2, n4 in generation i + 1; the four points are the vertices of a
non-degenerate rectangle with diagonals n1-n3 and n2-n4.  All checks here use
integer arithmetic only.

Properties checked by ``verify_lambda``:
  P1  closure: three vertices of a rectangle in the set force the fourth
  P2  every non-final member has exactly one spouse and one pair of children
  P3  every non-initial member has exactly one sibling and one pair of parents
  P4  spouse and sibling differ
  P5  every rectangle with vertices in the set is a family
  P6  every solution of n1 - n2 + n3 - n4 = 0 in the set is trivial or a family
  P7  no resonant three-wave combination sigma1|n1|^2 + sigma2|n2|^2 + sigma3|n3|^2 = 0
      with n1, n2 in the set and n3 != 0 fixed by momentum
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionFailed, DegenerateRectangle, NonIntegerChildren

Point = tuple[int, int]
Family = tuple[Point, Point, Point, Point]
PROPERTIES = ("P1", "P2", "P3", "P4", "P5", "P6", "P7")


def complete_family(n1: Point, n3: Point) -> tuple[Point, Point]:
    """Children of the parent pair (n1, n3): the other diagonal of the square-free rectangle.

    With Z^2 identified with the Gaussian integers,
    n2 = (n1 + n3)/2 + i (n1 - n3)/2 and n4 = (n1 + n3)/2 - i (n1 - n3)/2.
    """
    a, b = int(n1[0]), int(n1[1])
    c, d = int(n3[0]), int(n3[1])
    if (a, b) == (c, d):
        raise DegenerateRectangle(f"coincident parents {n1}")
    if (a + b + c + d) % 2:
        raise NonIntegerChildren(f"parents {n1}, {n3} give half-integer children")
    n2 = ((a + c - b + d) // 2, (b + d + a - c) // 2)
    n4 = ((a + c + b - d) // 2, (b + d - a + c) // 2)
    if n2 == n4 or n2 in (n1, n3) or n4 in (n1, n3) or n2 == (0, 0) or n4 == (0, 0):
        raise DegenerateRectangle(f"parents {n1}, {n3} give children {n2}, {n4}")
    return n2, n4


def is_family(f: Family) -> bool:
    n1, n2, n3, n4 = (np.asarray(p, dtype=np.int64) for p in f)
    momentum = np.all(n1 - n2 + n3 - n4 == 0)
    energy = n1 @ n1 + n3 @ n3 == n2 @ n2 + n4 @ n4
    distinct = len({tuple(p) for p in f}) == 4
    return bool(momentum and energy and distinct)


@dataclass(frozen=True)
class LambdaSet:
    generations: tuple[tuple[Point, ...], ...]
    families: tuple[Family, ...]
    q: int = 1
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def N(self) -> int:
        return len(self.generations)

    @property
    def G(self) -> int:
        return len(self.generations[0]) if self.generations else 0

    def points(self) -> list[Point]:
        return [p for g in self.generations for p in g]

    def generation_of(self) -> dict[Point, int]:
        """Map point -> 1-based generation index."""
        return {p: i + 1 for i, g in enumerate(self.generations) for p in g}

    def scaled(self, k: int) -> "LambdaSet":
        """Dilate every point by the integer k (properties are scale invariant)."""
        sc = lambda p: (p[0] * k, p[1] * k)
        gens = tuple(tuple(sc(p) for p in g) for g in self.generations)
        fams = tuple(tuple(sc(p) for p in f) for f in self.families)
        meta = dict(self.meta)
        meta["base_q"] = meta.get("base_q", self.q)
        return LambdaSet(gens, fams, self.q * k, meta)

    def base(self) -> "LambdaSet":
        """Undilated set on Z^2."""
        q = self.q
        d = lambda p: (p[0] // q, p[1] // q)
        gens = tuple(tuple(d(p) for p in g) for g in self.generations)
        fams = tuple(tuple(d(p) for p in f) for f in self.families)
        return LambdaSet(gens, fams, 1, dict(self.meta))

    def radius(self) -> int:
        return max(max(abs(x), abs(y)) for x, y in self.points()) if self.generations else 0

    def to_json(self) -> str:
        return json.dumps({"q": self.q, "N": self.N, "G": self.G,
                           "generations": [[list(p) for p in g] for g in self.generations],
                           "families": [[list(p) for p in f] for f in self.families],
                           "meta": self.meta})

    @classmethod
    def from_json(cls, text: str) -> "LambdaSet":
        d = json.loads(text)
        gens = tuple(tuple(tuple(p) for p in g) for g in d["generations"])
        fams = tuple(tuple(tuple(p) for p in f) for f in d["families"])
        return cls(gens, fams, int(d["q"]), d.get("meta", {}))


@dataclass
class PropertyReport:
    passed: dict
    witness: dict
    structure_ok: bool
    structure_witness: object
    weight_ratios: dict
    radii: list

    @property
    def all_pass(self) -> bool:
        return self.structure_ok and all(self.passed.values())

    def vector(self) -> tuple:
        return tuple(self.passed[p] for p in PROPERTIES)

    def to_json(self) -> str:
        return json.dumps({"passed": self.passed, "structure_ok": self.structure_ok,
                           "witness": {k: _jsonable(v) for k, v in self.witness.items()},
                           "structure_witness": _jsonable(self.structure_witness),
                           "weight_ratios": {f"{i},{j},{s}": r for (i, j, s), r in self.weight_ratios.items()},
                           "radii": self.radii})


def _jsonable(v):
    if v is None:
        return None
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


# -- brute-force machinery ----------------------------------------------------

class _Index:
    """Integer point table with vectorised membership lookup."""

    def __init__(self, pts):
        self.P = np.asarray(pts, dtype=np.int64).reshape(-1, 2)
        self.n = len(self.P)
        span = int(np.abs(self.P).max()) * 4 + 3 if self.n else 3
        self.base = 2 * span + 1
        self.span = span
        keys = self.key(self.P)
        self.order = np.argsort(keys)
        self.sorted = keys[self.order]

    def key(self, X):
        return (X[..., 0] + self.span) * self.base + (X[..., 1] + self.span)

    def lookup(self, X) -> np.ndarray:
        """Index of each point in X, or -1."""
        X = np.asarray(X, dtype=np.int64)
        inside = np.all(np.abs(X) <= self.span, axis=-1)
        k = self.key(np.where(inside[..., None], X, 0))
        pos = np.searchsorted(self.sorted, k).clip(0, max(self.n - 1, 0))
        hit = inside & (self.sorted[pos] == k) if self.n else np.zeros(k.shape, bool)
        return np.where(hit, self.order[pos], -1)


def _zero_sum_quadruples(idx: _Index):
    """All (i, j, k, l) with P_i - P_j + P_k - P_l = 0 and {i, k} != {j, l}."""
    P = idx.P
    n = idx.n
    if n == 0:
        return np.zeros((0, 4), np.int64)
    S = P[:, None, None, :] - P[None, :, None, :] + P[None, None, :, :]
    L = idx.lookup(S)
    i, j, k = np.nonzero(L >= 0)
    l = L[i, j, k]
    trivial = ((i == j) & (k == l)) | ((i == l) & (k == j))
    keep = ~trivial
    return np.stack([i[keep], j[keep], k[keep], l[keep]], axis=1)


def _family_keys(lam: LambdaSet, idx: _Index):
    keys = set()
    for f in lam.families:
        ids = [int(x) for x in idx.lookup(np.array(f))]
        keys.add((frozenset((ids[0], ids[2])), frozenset((ids[1], ids[3]))))
    return keys


def _quad_is_family(q, fkeys) -> bool:
    a = frozenset((int(q[0]), int(q[2])))
    b = frozenset((int(q[1]), int(q[3])))
    return (a, b) in fkeys or (b, a) in fkeys


def _check_structure(lam: LambdaSet):
    pts = lam.points()
    if len(set(pts)) != len(pts):
        dup = [p for p in pts if pts.count(p) > 1][0]
        return False, ("duplicate point", dup)
    if (0, 0) in pts:
        return False, ("zero element", (0, 0))
    sizes = {len(g) for g in lam.generations}
    if len(sizes) > 1:
        return False, ("unequal generation sizes", sorted(sizes))
    q = lam.q
    off = [p for p in pts if p[0] % q or p[1] % q]
    if off:
        return False, ("point off the dilated lattice", off[0])
    gen = lam.generation_of()
    for f in lam.families:
        if not is_family(f):
            return False, ("family is not a non-degenerate rectangle", f)
        g = [gen.get(p) for p in f]
        if None in g:
            return False, ("family vertex outside the set", f)
        if not (g[0] == g[2] and g[1] == g[3] and g[1] == g[0] + 1):
            return False, ("family generations out of order", f)
    return True, None


def verify_lambda(lam: LambdaSet, ratio_pairs=((3, 5, 2.0),)) -> PropertyReport:
    """Exhaustive integer verification of P1-P7 with concrete witnesses."""
    passed = {p: True for p in PROPERTIES}
    witness = {p: None for p in PROPERTIES}

    def fail(p, w):
        if passed[p]:
            passed[p] = False
            witness[p] = w

    ok, sw = _check_structure(lam)
    pts = lam.points()
    idx = _Index(pts)
    P = idx.P
    gen = lam.generation_of()
    N = lam.N

    # P2 / P3 / P4 from the family list
    as_parent = {p: [] for p in pts}
    as_child = {p: [] for p in pts}
    for f in lam.families:
        for p in (f[0], f[2]):
            if p in as_parent:
                as_parent[p].append(f)
        for c in (f[1], f[3]):
            if c in as_child:
                as_child[c].append(f)
    for p in pts:
        g = gen[p]
        want = 1 if g < N else 0
        if len(as_parent[p]) != want:
            fail("P2", [p, len(as_parent[p])])
        want = 1 if g > 1 else 0
        if len(as_child[p]) != want:
            fail("P3", [p, len(as_child[p])])
        if as_parent[p] and as_child[p]:
            f = as_parent[p][0]
            spouse = f[2] if f[0] == p else f[0]
            h = as_child[p][0]
            sibling = h[3] if h[1] == p else h[1]
            if spouse == sibling:
                fail("P4", [p, spouse])

    fkeys = _family_keys(lam, idx)

    # P1: right angle at n2 with n1, n2, n3 in the set forces n4 = n1 - n2 + n3 in the set
    if idx.n:
        D = P[:, None, :] - P[None, :, :]                      # D[i, j] = P_i - P_j
        dot = np.einsum("ijc,kjc->ijk", D, D)                   # (P_i - P_j).(P_k - P_j)
        n = idx.n
        I, J, Kk = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
        right = (dot == 0) & (I != J) & (Kk != J) & (I != Kk)
        i, j, k = np.nonzero(right)
        if len(i):
            n4 = P[i] - P[j] + P[k]
            found = idx.lookup(n4)
            bad = np.nonzero(found < 0)[0]
            if len(bad):
                b = bad[0]
                fail("P1", [tuple(map(int, P[i[b]])), tuple(map(int, P[j[b]])),
                            tuple(map(int, P[k[b]])), tuple(map(int, n4[b]))])

    # P5 / P6 over all zero-sum quadruples
    quads = _zero_sum_quadruples(idx)
    for qd in quads:
        if _quad_is_family(qd, fkeys):
            continue
        a, b, c, d = (P[t] for t in qd)
        tup = [tuple(map(int, x)) for x in (a, b, c, d)]
        fail("P6", tup)
        rect = int((a - b) @ (c - b)) == 0 and len({tuple(x) for x in tup}) == 4
        if rect:
            fail("P5", tup)
        if not passed["P5"] and not passed["P6"]:
            break

    # P7: sigma1|n1|^2 + sigma2|n2|^2 + sigma3|n3|^2 with sigma3 n3 = -(sigma1 n1 + sigma2 n2)
    if idx.n:
        sq = np.einsum("ic,ic->i", P, P)
        for s2, s3 in itertools.product((1, -1), (1, -1)):
            V = P[:, None, :] + s2 * P[None, :, :]
            n3sq = np.einsum("ijc,ijc->ij", V, V)
            val = sq[:, None] + s2 * sq[None, :] + s3 * n3sq
            nz = n3sq != 0
            bad = np.argwhere((val == 0) & nz)
            if len(bad):
                a, b = bad[0]
                n3 = tuple(int(x) for x in -s3 * V[a, b])
                fail("P7", [(1, s2, s3), tuple(map(int, P[a])), tuple(map(int, P[b])), n3])
                break

    ratios = {}
    for (i, j, s) in ratio_pairs:
        if 1 <= i <= N and 1 <= j <= N:
            ratios[(i, j, s)] = weight_ratio(lam, s, i, j)
    radii = []
    for g in lam.generations:
        r = [math.hypot(*p) for p in g]
        radii.append([min(r), max(r)] if r else [0.0, 0.0])
    return PropertyReport(passed, witness, ok, sw, ratios, radii)


def generation_weight(lam: LambdaSet, s: float, i: int) -> int | float:
    """Sum over generation i of |n|^(2s); exact integer when s is an integer."""
    g = lam.generations[i - 1]
    if float(s).is_integer():
        return sum((x * x + y * y) ** int(s) for x, y in g)
    return sum((x * x + y * y) ** s for x, y in g)


def weight_ratio(lam: LambdaSet, s: float, i: int, j: int) -> float:
    if i == j:
        return 1.0
    return float(generation_weight(lam, s, j) / generation_weight(lam, s, i))


def weight_bounds(lam: LambdaSet, s: float) -> dict:
    """Measured last/first weight ratio against the exp(sN) growth envelope."""
    r = weight_ratio(lam, s, 1, lam.N)
    env = math.exp(s * lam.N)
    return {"ratio_last_first": r, "envelope": env, "within": r <= env}


# -- construction --------------------------------------------------------------

def _perfect_matchings(items):
    if not items:
        yield []
        return
    a = items[0]
    for k in range(1, len(items)):
        b = items[k]
        rest = items[1:k] + items[k + 1:]
        for m in _perfect_matchings(rest):
            yield [(a, b)] + m


def desk_generation_size(N: int) -> int:
    """Members per generation at desk scale: the full 2^(N-1) capped at 8."""
    return min(2 ** (N - 1), 8)


def _quick_ok(fams: list[Family], gens) -> tuple[bool, str]:
    """Partial-set check of the point-geometry properties (P2/P3 need the final set)."""
    lam = LambdaSet(tuple(tuple(g) for g in gens), tuple(fams), 1)
    rep = verify_lambda(lam, ratio_pairs=())
    if not rep.structure_ok:
        return False, "structure"
    for p in ("P1", "P4", "P5", "P6", "P7"):
        if not rep.passed[p]:
            return False, p
    return True, ""


def build_lambda(N: int, G: int | None = None, q: int = 1, seed: int = 0,
                 radius: int = 300, grow: bool = False, max_restarts: int = 400,
                 candidates: int = 30, ratio_target: tuple | None = None,
                 shell: bool = False) -> LambdaSet:
    """Randomised generation-by-generation construction.

    Generation 1 is drawn as G/2 parent pairs inside the box |x|, |y| <= radius.
    Each later generation is paired by a perfect matching that avoids sibling
    pairs (P4) and parity-incompatible pairs (children must be integral);
    candidate matchings are tried in random order, or best-first by the
    |n|^4 weight of the children when ``grow`` is set, and a matching is kept
    only if the partial set still satisfies P1 and P4-P7.  The dilation by q
    is applied last.

    ``shell`` draws generation 1 near the circle of the given radius, each
    pair at an angle of 50 to 75 degrees, so that the children split into a
    long and a short vector and the fourth-power weight grows downstream.

    ``ratio_target = (i, j, s, value)`` keeps restarting until the weight
    ratio of generation j over generation i reaches value; the best valid set
    found is returned if the budget runs out first.
    """
    if G is None:
        G = desk_generation_size(N)
    if N < 3:
        raise ConstructionFailed("need at least three generations", blocking="N")
    if G < 2 or G % 2:
        raise ConstructionFailed(f"generation size {G} admits no perfect spouse matching",
                                 blocking="P2")
    if G == 2:
        raise ConstructionFailed("with two members per generation the only spouse is the sibling",
                                 blocking="P4")
    rng = np.random.default_rng(seed)
    blockers: dict[str, int] = {}
    best, best_ratio = None, -math.inf
    for attempt in range(max_restarts):
        gen1 = _draw_first_generation(rng, G, radius, shell=shell)
        if gen1 is None:
            blockers["draw"] = blockers.get("draw", 0) + 1
            continue
        pairs = [(gen1[2 * i], gen1[2 * i + 1]) for i in range(G // 2)]
        result = _extend(rng, [gen1], [], pairs, N, grow, candidates, blockers)
        if result is not None:
            gens, fams = result
            lam = LambdaSet(tuple(tuple(g) for g in gens), tuple(fams), 1,
                            {"seed": seed, "radius": radius, "grow": grow,
                             "G": G, "shell": shell, "full_multiplicity": 2 ** (N - 1),
                             "restarts": attempt})
            if not verify_lambda(lam, ratio_pairs=()).all_pass:
                blockers["final"] = blockers.get("final", 0) + 1
                continue
            if ratio_target is None:
                return lam.scaled(q) if q != 1 else lam
            i, j, sw, want = ratio_target
            r = weight_ratio(lam, sw, i, j)
            if r > best_ratio:
                best, best_ratio = lam, r
            if r >= want:
                break
    if best is not None:
        best.meta["target_ratio"] = best_ratio
        return best.scaled(q) if q != 1 else best
    worst = max(blockers, key=blockers.get) if blockers else "unknown"
    raise ConstructionFailed(f"no valid set after {max_restarts} restarts; blockers {blockers}",
                             blocking=worst)


def _shell_pair(rng, radius):
    phi = rng.uniform(0, 2 * math.pi)
    gam = math.radians(rng.uniform(50, 75))
    r1, r2 = radius * rng.uniform(0.95, 1.05, size=2)
    a = (round(r1 * math.cos(phi)), round(r1 * math.sin(phi)))
    b = (round(r2 * math.cos(phi + gam)), round(r2 * math.sin(phi + gam)))
    if (a[0] + a[1] + b[0] + b[1]) % 2:
        b = (b[0] + 1, b[1])
    return a, b


def _draw_first_generation(rng, G, radius, tries=400, shell=False):
    """Parent pairs drawn one at a time; a pair is kept only if the first two
    generations built so far still pass P1 and P5-P7."""
    pts: list[Point] = []
    kids: list[Point] = []
    fams: list[Family] = []
    for _ in range(tries):
        if len(pts) == G:
            return pts
        if shell:
            a, b = _shell_pair(rng, radius)
        else:
            a = tuple(int(x) for x in rng.integers(-radius, radius + 1, size=2))
            b = tuple(int(x) for x in rng.integers(-radius, radius + 1, size=2))
        if (a[0] + a[1] + b[0] + b[1]) % 2 or a == b or (0, 0) in (a, b):
            continue
        try:
            c2, c4 = complete_family(a, b)
        except (DegenerateRectangle, NonIntegerChildren):
            continue
        new = {a, b, c2, c4}
        if len(new) < 4 or new & (set(pts) | set(kids)):
            continue
        gens = [pts + [a, b], kids + [c2, c4]]
        f = fams + [(a, c2, b, c4)]
        if _quick_ok(f, gens)[0]:
            pts, kids, fams = gens[0], gens[1], f
    return pts if len(pts) == G else None


def _children_of(pairs):
    fams, kids = [], []
    for a, b in pairs:
        c2, c4 = complete_family(a, b)
        fams.append((a, c2, b, c4))
        kids.extend([c2, c4])
    return fams, kids


def _extend(rng, gens, fams, pairs, N, grow, candidates, blockers):
    """Depth-first extension; ``pairs`` is the spouse matching of the last generation."""
    try:
        new_fams, kids = _children_of(pairs)
    except (DegenerateRectangle, NonIntegerChildren):
        blockers["degenerate"] = blockers.get("degenerate", 0) + 1
        return None
    existing = {p for g in gens for p in g}
    if len(set(kids)) != len(kids) or existing & set(kids):
        blockers["collision"] = blockers.get("collision", 0) + 1
        return None
    gens2 = gens + [kids]
    fams2 = fams + new_fams
    ok, why = _quick_ok(fams2, gens2)
    if not ok:
        blockers[why] = blockers.get(why, 0) + 1
        return None
    if len(gens2) == N:
        return gens2, fams2
    sibling = {}
    for f in new_fams:
        sibling[f[1]], sibling[f[3]] = f[3], f[1]
    options = []
    for m in _perfect_matchings(list(kids)):
        if any(sibling[a] == b for a, b in m):
            continue
        if any((a[0] + a[1] + b[0] + b[1]) % 2 for a, b in m):
            continue
        options.append(m)
    if not options:
        blockers["parity"] = blockers.get("parity", 0) + 1
        return None
    if grow:
        scored = []
        for m in options:
            try:
                _, ch = _children_of(m)
            except (DegenerateRectangle, NonIntegerChildren):
                continue
            w = sum((x * x + y * y) ** 2 for x, y in ch)
            scored.append((w + rng.random(), m))
        scored.sort(key=lambda t: -t[0])
        options = [m for _, m in scored]
    else:
        order = rng.permutation(len(options))
        options = [options[i] for i in order]
    for m in options[:candidates]:
        res = _extend(rng, gens2, fams2, m, N, grow, candidates, blockers)
        if res is not None:
            return res
    return None

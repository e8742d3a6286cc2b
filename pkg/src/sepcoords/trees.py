"""Rooted planar trees: text grammar, enumeration by face codimension,
dyslectic canonical forms, the grafting operad and associahedron counts.

Grammar (whitespace between tokens is ignored)::

    Tree := "*" | "(" Tree ("," Tree)+ ")"

``*`` is a leaf; every internal node has at least two children.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial
from typing import Iterator, Sequence


@dataclass(frozen=True)
class Tree:
    """A leaf (no children) or an internal node with >= 2 ordered children."""

    children: tuple["Tree", ...] = ()

    def __post_init__(self):
        if len(self.children) == 1:
            raise ValueError("internal node with a single child")
        object.__setattr__(self, "children", tuple(self.children))

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def arity(self) -> int:
        return len(self.children)

    @property
    def leaves(self) -> int:
        return _leaves(self)

    @property
    def internal_nodes(self) -> int:
        return _internal(self)

    def __str__(self) -> str:
        return serialize_tree(self)

    def __repr__(self) -> str:
        return f"Tree({serialize_tree(self)!r})"

    def __lt__(self, other: "Tree") -> bool:
        return serialize_tree(self) < serialize_tree(other)

    def nodes(self, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], "Tree"]]:
        """Pre-order (path, subtree) pairs; the path lists child indices from the root."""
        yield path, self
        for i, c in enumerate(self.children):
            yield from c.nodes(path + (i,))

    def subtree(self, path: Sequence[int]) -> "Tree":
        t = self
        for i in path:
            t = t.children[i]
        return t

    def leaf_paths(self) -> list[tuple[int, ...]]:
        return [p for p, t in self.nodes() if t.is_leaf]


LEAF = Tree()


@lru_cache(maxsize=None)
def _leaves(t: Tree) -> int:
    return 1 if t.is_leaf else sum(_leaves(c) for c in t.children)


@lru_cache(maxsize=None)
def _internal(t: Tree) -> int:
    return 0 if t.is_leaf else 1 + sum(_internal(c) for c in t.children)


def corolla(k: int) -> Tree:
    if k < 2:
        raise ValueError("a corolla needs at least two leaves")
    return Tree((LEAF,) * k)


def left_comb(L: int) -> Tree:
    """((..((*,*),*)..),*) with L leaves."""
    if L < 1:
        raise ValueError("L must be >= 1")
    t = LEAF
    for _ in range(L - 1):
        t = Tree((t, LEAF))
    return t


def right_comb(L: int) -> Tree:
    t = LEAF
    for _ in range(L - 1):
        t = Tree((LEAF, t))
    return t


# -- text format ------------------------------------------------------------------

class TreeSyntaxError(ValueError):
    def __init__(self, message: str, pos: int, text: str):
        super().__init__(f"{message} at position {pos}: {text!r}")
        self.pos = pos
        self.text = text


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str) -> None:
        if self.peek() != ch:
            got = self.peek() or "end of input"
            raise TreeSyntaxError(f"expected {ch!r}, got {got!r}", self.pos, self.text)
        self.pos += 1

    def tree(self) -> Tree:
        ch = self.peek()
        if ch == "*":
            self.pos += 1
            return LEAF
        if ch == "(":
            start = self.pos
            self.pos += 1
            kids = [self.tree()]
            while self.peek() == ",":
                self.pos += 1
                kids.append(self.tree())
            self.expect(")")
            if len(kids) < 2:
                raise TreeSyntaxError("internal node with fewer than two children", start, self.text)
            return Tree(tuple(kids))
        got = ch or "end of input"
        raise TreeSyntaxError(f"expected '*' or '(', got {got!r}", self.pos, self.text)


def parse_tree(text: str) -> Tree:
    """Parse the tree grammar; errors carry the offending position."""
    p = _Parser(text)
    t = p.tree()
    if p.peek():
        raise TreeSyntaxError("trailing characters", p.pos, text)
    return t


@lru_cache(maxsize=None)
def serialize_tree(t: Tree) -> str:
    if t.is_leaf:
        return "*"
    return "(" + ",".join(serialize_tree(c) for c in t.children) + ")"


# -- enumeration -------------------------------------------------------------------

@lru_cache(maxsize=None)
def _trees(L: int, k: int) -> tuple[Tree, ...]:
    """All trees with L leaves and k internal nodes."""
    if L == 1:
        return (LEAF,) if k == 0 else ()
    if k < 1 or k > L - 1:
        return ()
    out = []
    for r in range(2, L + 1):
        out.extend(Tree(f) for f in _forests(L, k - 1, r))
    return tuple(out)


@lru_cache(maxsize=None)
def _forests(L: int, k: int, r: int) -> tuple[tuple[Tree, ...], ...]:
    """Ordered sequences of r trees with L leaves and k internal nodes in total."""
    if r == 0:
        return ((),) if (L == 0 and k == 0) else ()
    out = []
    for l1 in range(1, L - (r - 1) + 1):
        for k1 in range(0, min(k, l1 - 1) + 1):
            heads = _trees(l1, k1)
            if not heads:
                continue
            tails = _forests(L - l1, k - k1, r - 1)
            for h in heads:
                for tl in tails:
                    out.append((h,) + tl)
    return tuple(out)


def enumerate_trees(L: int, m: int) -> list[Tree]:
    """Trees with L leaves and m internal nodes besides the root (codimension-m faces of K_L).

    Sorted by serialization.
    """
    if L < 2:
        raise ValueError("L must be >= 2")
    if not 0 <= m <= L - 2:
        raise ValueError(f"m must lie in [0, {L - 2}] for L={L}")
    return sorted(_trees(L, m + 1), key=serialize_tree)


def all_trees(L: int) -> list[Tree]:
    if L == 1:
        return [LEAF]
    return [t for m in range(L - 1) for t in enumerate_trees(L, m)]


@dataclass(frozen=True)
class FaceDescriptor:
    tree: Tree
    leaves: int
    inner_nonroot: int

    @property
    def dimension(self) -> int:
        return (self.leaves - 2) - self.inner_nonroot

    @classmethod
    def of(cls, t: Tree) -> "FaceDescriptor":
        if t.is_leaf:
            raise ValueError("a single leaf labels no face")
        return cls(t, t.leaves, t.internal_nodes - 1)


def moduli_count(t: Tree) -> int:
    """Sum over internal nodes of (arity - 2): continuous parameters of the family."""
    return sum(s.arity - 2 for _, s in t.nodes() if not s.is_leaf)


def catalan(n: int) -> int:
    return comb(2 * n, n) // (n + 1)


def count_faces(L: int) -> dict[int, int]:
    """Number of codimension-m faces of the associahedron K_L, for each m."""
    if L < 2:
        raise ValueError("L must be >= 2")
    return {m: len(_trees(L, m + 1)) for m in range(L - 1)}


def tile_count(n: int) -> int:
    """Number of associahedra K_{n+1} tiling the moduli space for S^n: (n+1)!/2."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return factorial(n + 1) // 2


# -- dyslectic equivalence ------------------------------------------------------------

@lru_cache(maxsize=None)
def dyslectic_canonical(t: Tree) -> Tree:
    """Canonical representative under reversing children at any nodes.

    Children are canonicalized first; then the smaller (by serialization) of
    the child sequence and its reversal is kept.
    """
    if t.is_leaf:
        return t
    kids = tuple(dyslectic_canonical(c) for c in t.children)
    fwd, rev = Tree(kids), Tree(kids[::-1])
    return fwd if serialize_tree(fwd) <= serialize_tree(rev) else rev


def dyslectic(t1: Tree, t2: Tree) -> bool:
    return dyslectic_canonical(t1) == dyslectic_canonical(t2)


def dyslectic_classes(L: int, m: int | None = None) -> dict[Tree, list[Tree]]:
    """Group trees with L leaves (optionally of one codimension) by canonical form."""
    trees = all_trees(L) if m is None else enumerate_trees(L, m)
    classes: dict[Tree, list[Tree]] = {}
    for t in trees:
        classes.setdefault(dyslectic_canonical(t), []).append(t)
    return dict(sorted(classes.items(), key=lambda kv: serialize_tree(kv[0])))


def reverse_at(t: Tree, path: Sequence[int]) -> Tree:
    """Reverse the children of the node at ``path``."""
    if not path:
        if t.is_leaf:
            raise ValueError("cannot reverse a leaf")
        return Tree(t.children[::-1])
    i = path[0]
    kids = list(t.children)
    kids[i] = reverse_at(kids[i], path[1:])
    return Tree(tuple(kids))


# -- grafting operad ------------------------------------------------------------------

def graft(t: Tree, subtrees: Sequence[Tree]) -> Tree:
    """Graft ``subtrees`` onto the leaves of ``t``, left to right."""
    subtrees = list(subtrees)
    if len(subtrees) != t.leaves:
        raise ValueError(f"arity mismatch: tree has {t.leaves} leaves, got {len(subtrees)} subtrees")
    it = iter(subtrees)

    def go(s: Tree) -> Tree:
        if s.is_leaf:
            return next(it)
        return Tree(tuple(go(c) for c in s.children))

    return go(t)


@dataclass(frozen=True)
class LabeledTree:
    """Planar tree with leaves labelled by a permutation of 0..L-1 (planar order).

    This is the symmetric version of the grafting operad: the leaf labelled
    j receives input j.  ``act(pi)`` relabels j -> pi[j], so that
    (t.act(pi))(a_0, ...) = t(a_pi[0], ...).
    """

    tree: Tree
    labels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if sorted(self.labels) != list(range(self.tree.leaves)):
            raise ValueError("labels must be a permutation of the leaf positions")

    @classmethod
    def plain(cls, t: Tree) -> "LabeledTree":
        return cls(t, tuple(range(t.leaves)))

    @property
    def arity(self) -> int:
        return self.tree.leaves

    def act(self, pi: Sequence[int]) -> "LabeledTree":
        pi = tuple(pi)
        if sorted(pi) != list(range(self.arity)):
            raise ValueError("not a permutation of the right size")
        return LabeledTree(self.tree, tuple(pi[j] for j in self.labels))

    def compose(self, xs: Sequence["LabeledTree"]) -> "LabeledTree":
        """Replace the leaf labelled i by xs[i] with labels shifted by the sizes of xs[:i]."""
        xs = list(xs)
        if len(xs) != self.arity:
            raise ValueError("arity mismatch")
        offsets = [0]
        for x in xs:
            offsets.append(offsets[-1] + x.arity)
        subs = [xs[j].tree for j in self.labels]
        labels = []
        for j in self.labels:
            labels.extend(offsets[j] + l for l in xs[j].labels)
        return LabeledTree(graft(self.tree, subs), tuple(labels))

    def evaluate(self, inputs: Sequence) -> object:
        """Nested-tuple value with leaf labelled j replaced by inputs[j]."""
        it = iter(self.labels)

        def go(s: Tree):
            if s.is_leaf:
                return inputs[next(it)]
            return tuple(go(c) for c in s.children)

        return go(self.tree)


def block_permutation(pi: Sequence[int], sizes: Sequence[int]) -> tuple[int, ...]:
    """Permutation of sum(sizes) inputs induced by permuting k blocks by pi.

    Block j of the composite (size sizes[j]) is sent to the position it
    occupies after the blocks are reordered as xs[pi^-1(0)], xs[pi^-1(1)], ...
    """
    k = len(sizes)
    inv = [0] * k
    for i, p in enumerate(pi):
        inv[p] = i
    new_sizes = [sizes[inv[i]] for i in range(k)]
    new_off = [0]
    for s in new_sizes:
        new_off.append(new_off[-1] + s)
    old_off = [0]
    for s in sizes:
        old_off.append(old_off[-1] + s)
    out = [0] * old_off[-1]
    for j in range(k):
        for t in range(sizes[j]):
            out[old_off[j] + t] = new_off[pi[j]] + t
    return tuple(out)


def permute_blocks(xs: Sequence, pi: Sequence[int]) -> list:
    """(x_0, ..., x_{k-1}) * pi = (x_{pi^-1(0)}, ..., x_{pi^-1(k-1)})."""
    k = len(xs)
    inv = [0] * k
    for i, p in enumerate(pi):
        inv[p] = i
    return [xs[inv[i]] for i in range(k)]


def product_permutation(pis: Sequence[Sequence[int]]) -> tuple[int, ...]:
    """Image of (pi_1, ..., pi_k) under S_n1 x ... x S_nk -> S_(n1+...+nk)."""
    out = []
    off = 0
    for pi in pis:
        out.extend(off + p for p in pi)
        off += len(pi)
    return tuple(out)


def binary_by_grafting(L: int) -> set[Tree]:
    """All trees reachable from a leaf by repeatedly grafting 2-corollas onto single leaves."""
    c2 = corolla(2)
    level = {LEAF}
    for _ in range(L - 1):
        nxt = set()
        for t in level:
            k = t.leaves
            for i in range(k):
                subs = [LEAF] * k
                subs[i] = c2
                nxt.add(graft(t, subs))
        level = nxt
    return level

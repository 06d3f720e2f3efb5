"""Control-flow graph over decoded instructions.

Blocks split at jump targets, after branches/returns, and at exception
handler targets.  Exception edges take part in block splitting but are
excluded from the dominator universe: handler subtrees get their own
dominator run rooted at the handler when the structurer needs loops there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

SETUP_OPS = {"SETUP_FINALLY", "SETUP_WITH", "SETUP_ASYNC_WITH"}
_RETURNING = {"RETURN_VALUE", "RAISE_VARARGS", "RERAISE", "END_FINALLY"}


@dataclass
class BasicBlock:
    id: int
    start: int
    end: int  # [start, end) in byte offsets
    instrs: list
    successors: list = field(default_factory=list)  # (block_id, kind)
    predecessors: list = field(default_factory=list)

    @property
    def last(self):
        return self.instrs[-1]

    def succ_of_kind(self, kind):
        for bid, k in self.successors:
            if k == kind:
                return bid
        return None

    def __repr__(self):
        return f"<B{self.id} [{self.start},{self.end})>"


@dataclass
class Loop:
    header: int  # block id
    body: frozenset  # block ids including header
    back_edges: tuple


@dataclass
class Cfg:
    blocks: dict  # id -> BasicBlock
    entry: int
    block_at: dict  # start offset -> block id
    exception_entries: list

    def block_of_offset(self, offset):
        return self.blocks[self.block_at[offset]]

    def __iter__(self):
        return iter(self.blocks.values())


def _block_enders(instrs):
    """Offsets of instructions that end their basic block."""
    enders = set()
    for ins in instrs:
        if ins.opname in _RETURNING:
            enders.add(ins.offset)
        elif ins.is_jump and ins.opname not in SETUP_OPS:
            enders.add(ins.offset)
    return enders


def build_basic_blocks(instrs, exception_entries=()) -> Cfg:
    by_offset = {ins.offset: ins for ins in instrs}
    leaders = {instrs[0].offset}
    for ins in instrs:
        if ins.is_jump:
            leaders.add(ins.argval)
    enders = _block_enders(instrs)
    for ins in instrs:
        if ins.offset in enders and ins.end_offset < instrs[-1].end_offset:
            leaders.add(ins.end_offset)
    end_of_code = instrs[-1].end_offset
    for entry in exception_entries:
        leaders.add(entry.target)
        leaders.add(entry.start)
        if entry.end < end_of_code:
            leaders.add(entry.end)

    order = sorted(leaders)
    blocks = {}
    block_at = {}
    for i, start in enumerate(order):
        end = order[i + 1] if i + 1 < len(order) else end_of_code
        body = [ins for ins in instrs if start <= ins.offset < end]
        b = BasicBlock(id=i, start=start, end=end, instrs=body)
        blocks[i] = b
        block_at[start] = i

    def link(src, dst_offset, kind):
        dst = block_at[dst_offset]
        src.successors.append((dst, kind))
        blocks[dst].predecessors.append(src.id)

    for b in blocks.values():
        if not b.instrs:
            continue
        last = b.last
        name = last.opname
        falls = True
        if name in ("RETURN_VALUE", "RAISE_VARARGS", "RERAISE"):
            falls = False
        elif name == "FOR_ITER":
            link(b, last.argval, "jump_taken")
            link(b, last.end_offset, "jump_not_taken")
            falls = False
        elif last.is_jump and name not in SETUP_OPS:
            conditional = name.startswith("POP_JUMP") or name in (
                "JUMP_IF_FALSE_OR_POP",
                "JUMP_IF_TRUE_OR_POP",
                "JUMP_IF_NOT_EXC_MATCH",
                "CALL_FINALLY",
            )
            link(b, last.argval, "jump_taken")
            if conditional:
                link(b, last.end_offset, "jump_not_taken")
            falls = False
        if falls and b.end < end_of_code:
            link(b, b.end, "fallthrough")

    # Exception edges: every block overlapping a protected range gets an
    # edge to the handler block.
    for entry in exception_entries:
        target = block_at[entry.target]
        for b in blocks.values():
            if b.start < entry.end and b.end > entry.start:
                if (target, "exception") not in b.successors and b.id != target:
                    b.successors.append((target, "exception"))
                    blocks[target].predecessors.append(b.id)

    return Cfg(blocks=blocks, entry=block_at[instrs[0].offset],
               block_at=block_at, exception_entries=list(exception_entries))


def reachable_from(cfg, root, include_exception=False):
    seen = set()
    work = [root]
    while work:
        bid = work.pop()
        if bid in seen:
            continue
        seen.add(bid)
        for succ, kind in cfg.blocks[bid].successors:
            if kind == "exception" and not include_exception:
                continue
            if succ not in seen:
                work.append(succ)
    return seen


def compute_dominators(cfg, root=None, universe=None):
    """Immediate dominators by the standard RPO intersection iteration.

    Exception edges never count; universe defaults to the blocks reachable
    from the root over normal edges.
    """
    if root is None:
        root = cfg.entry
    if universe is None:
        universe = reachable_from(cfg, root)

    order = []
    seen = set()

    def dfs(bid):
        seen.add(bid)
        for succ, kind in cfg.blocks[bid].successors:
            if kind != "exception" and succ in universe and succ not in seen:
                dfs(succ)
        order.append(bid)

    import sys

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 2 * len(universe) + 100))
    try:
        dfs(root)
    finally:
        sys.setrecursionlimit(old)
    rpo = list(reversed(order))
    rpo_index = {bid: i for i, bid in enumerate(rpo)}

    idom = {root: root}
    changed = True
    while changed:
        changed = False
        for bid in rpo:
            if bid == root:
                continue
            preds = [
                p
                for p in cfg.blocks[bid].predecessors
                if p in idom
                and p in universe
                and any(s == bid and k != "exception" for s, k in cfg.blocks[p].successors)
            ]
            if not preds:
                continue
            new = preds[0]
            for p in preds[1:]:
                a, b = new, p
                while a != b:
                    while rpo_index[a] > rpo_index[b]:
                        a = idom[a]
                    while rpo_index[b] > rpo_index[a]:
                        b = idom[b]
                new = a
            if idom.get(bid) != new:
                idom[bid] = new
                changed = True
    return idom


def dominates(idom, a, b):
    """True when a dominates b under the idom map."""
    while True:
        if a == b:
            return True
        parent = idom.get(b)
        if parent is None or parent == b:
            return a == b
        b = parent


@dataclass
class LoopForest:
    loops: list  # of Loop, outermost first
    reducible: bool
    headers: frozenset


def analyze_loops(cfg, idom, universe=None) -> LoopForest:
    """Natural loops via back edges; irreducible when a retreating edge
    targets a non-dominator."""
    if universe is None:
        universe = set(idom)
    back_edges = []
    reducible = True
    retreat = []
    roots = [b for b in universe if all(p not in universe for p in cfg.blocks[b].predecessors)]
    root = roots[0] if roots else (cfg.entry if cfg.entry in universe else min(universe))

    onstack = set()
    visited = set()

    def dfs(u):
        visited.add(u)
        onstack.add(u)
        for v, kind in cfg.blocks[u].successors:
            if kind == "exception" or v not in universe:
                continue
            if v not in visited:
                dfs(v)
            elif v in onstack:
                retreat.append((u, v))
        onstack.discard(u)

    import sys

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 2 * len(universe) + 100))
    try:
        dfs(root)
    finally:
        sys.setrecursionlimit(old)

    for u, v in retreat:
        if dominates(idom, v, u):
            back_edges.append((u, v))
        else:
            reducible = False

    by_header = {}
    for u, v in back_edges:
        by_header.setdefault(v, []).append(u)

    loops = []
    for header, tails in by_header.items():
        body = {header}
        work = list(tails)
        while work:
            n = work.pop()
            if n in body:
                continue
            body.add(n)
            for p in cfg.blocks[n].predecessors:
                if p in universe and any(
                    s == n and k != "exception" for s, k in cfg.blocks[p].successors
                ):
                    work.append(p)
        loops.append(Loop(header=header, body=frozenset(body),
                          back_edges=tuple((u, header) for u in tails)))

    loops.sort(key=lambda l: -len(l.body))
    # Tag back edges for the dot export.
    for loop in loops:
        for u, v in loop.back_edges:
            b = cfg.blocks[u]
            b.successors = [
                (s, "loop_back" if s == v and k in ("jump_taken", "fallthrough") else k)
                for s, k in b.successors
            ]
    return LoopForest(loops=loops, reducible=reducible,
                      headers=frozenset(by_header))


def prune_unreachable(cfg) -> Cfg:
    """Drop blocks unreachable over any edge kind (dead code after return)."""
    keep = reachable_from(cfg, cfg.entry, include_exception=True)
    dead = set(cfg.blocks) - keep
    if not dead:
        return cfg
    for bid in keep:
        b = cfg.blocks[bid]
        b.successors = [(s, k) for s, k in b.successors if s in keep]
        b.predecessors = [p for p in b.predecessors if p in keep]
    cfg.blocks = {bid: b for bid, b in cfg.blocks.items() if bid in keep}
    cfg.block_at = {off: bid for off, bid in cfg.block_at.items() if bid in keep}
    return cfg


def to_dot(cfg) -> str:
    lines = ["digraph cfg {", "  node [shape=box fontname=monospace];"]
    for b in sorted(cfg.blocks.values(), key=lambda x: x.start):
        label = f"B{b.id} [{b.start},{b.end})\\l"
        for ins in b.instrs:
            argpart = "" if ins.arg is None else f" {ins.arg}"
            label += f"{ins.op_offset} {ins.opname}{argpart}\\l"
        lines.append(f'  b{b.id} [label="{label}"];')
    for b in cfg.blocks.values():
        for succ, kind in b.successors:
            style = ' style=dashed' if kind == "exception" else ""
            lines.append(f'  b{b.id} -> b{succ} [label="{kind}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"

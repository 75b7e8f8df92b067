"""Commentable code block extraction and comment I/O.

An irreducible block is the smallest commentable unit: a single primitive
(with any wrapping transform chain) or a difference / intersection / hull
whose subtree contains only primitives and transforms.  Composite blocks are
union or transform-group ancestors of other commentable blocks.  A sole
top-level union wrapping the whole program is treated as the root and is not
commentable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import MalformedCommentError, NotExpandedError
from .nodes import AstNode, SourceFile, SyntaxTree

UNLABELED = "unlabeled"

# a line previously emitted by insert_comments (and nothing else)
GENERATED_COMMENT_RE = re.compile(r"^\s*//\s?[a-z ,]+\s*$")
COMMENT_LINE_RE = re.compile(r"^\s*//(.*)$")


@dataclass
class CodeBlock:
    id: int
    kind: str  # "irreducible" | "composite"
    span: tuple[int, int]
    ast_node: int
    parent: Optional[int] = None
    children: list[int] = field(default_factory=list)


@dataclass
class BlockSet:
    blocks: dict[int, CodeBlock]
    roots: list[int]

    def block(self, block_id: int) -> CodeBlock:
        return self.blocks[block_id]

    def in_source_order(self) -> list[CodeBlock]:
        return [self.blocks[i] for i in sorted(self.blocks)]

    def irreducible(self) -> list[CodeBlock]:
        return [b for b in self.in_source_order() if b.kind == "irreducible"]

    def leaves_under(self, block_id: int) -> list[int]:
        """Irreducible block ids in the subtree rooted at block_id."""
        block = self.blocks[block_id]
        if block.kind == "irreducible":
            return [block.id]
        out: list[int] = []
        for c in block.children:
            out.extend(self.leaves_under(c))
        return out

    def to_json_obj(self) -> list[dict]:
        return [
            {
                "id": b.id,
                "kind": b.kind,
                "span": list(b.span),
                "parent": b.parent,
                "children": list(b.children),
            }
            for b in self.in_source_order()
        ]


@dataclass
class BlockAssignment:
    labels: dict[int, list[str]] = field(default_factory=dict)
    scores: dict[int, float] = field(default_factory=dict)

    def labeled_ids(self) -> list[int]:
        return sorted(i for i, ls in self.labels.items() if ls)


def _preorder_index(tree: SyntaxTree) -> dict[int, int]:
    return {node.id: i for i, node in enumerate(tree.walk())}


def _prim_only(tree: SyntaxTree, node_id: int) -> bool:
    return all(n.kind in ("primitive", "transform") for n in tree.walk(node_id))


def _is_stop(tree: SyntaxTree, node: AstNode) -> bool:
    if node.kind == "primitive":
        return True
    if node.kind in ("hull",) or (node.kind == "boolean" and node.name in ("difference", "intersection")):
        return all(_prim_only(tree, c) for c in node.children)
    if node.kind == "transform" and len(node.children) == 1:
        return _is_stop(tree, tree.nodes[node.children[0]])
    return False


def find_irreducible_blocks(tree: SyntaxTree) -> list[CodeBlock]:
    """Breadth-first descent from the root, stopping at irreducible nodes."""
    if not tree.is_expanded():
        raise NotExpandedError("tree still contains for/module/assign nodes; expand first")
    order = _preorder_index(tree)
    stops: list[int] = []
    queue = list(tree.nodes[tree.root].children)
    while queue:
        node_id = queue.pop(0)
        node = tree.nodes[node_id]
        if _is_stop(tree, node):
            stops.append(node_id)
        else:
            queue.extend(node.children)
    stops.sort(key=lambda nid: order[nid])
    return [
        CodeBlock(id=i, kind="irreducible", span=tree.nodes[nid].span, ast_node=nid)
        for i, nid in enumerate(stops)
    ]


def _root_equivalent(tree: SyntaxTree) -> Optional[int]:
    """A sole top-level union wrapping the whole program acts as the root."""
    root = tree.nodes[tree.root]
    if len(root.children) == 1:
        only = tree.nodes[root.children[0]]
        if only.kind == "boolean" and only.name == "union":
            return only.id
    return None


def collect_commentable_blocks(leaves: list[CodeBlock], tree: SyntaxTree) -> BlockSet:
    """Walk upward from irreducible blocks, collecting composite ancestors."""
    order = _preorder_index(tree)
    parents = tree.parent_map()
    skip = {tree.root}
    root_equiv = _root_equivalent(tree)
    if root_equiv is not None:
        skip.add(root_equiv)

    # candidate composite ast nodes -> set of leaf block ids beneath them
    candidates: dict[int, set[int]] = {}
    for leaf in leaves:
        nid = parents.get(leaf.ast_node)
        while nid is not None and nid not in skip:
            node = tree.nodes[nid]
            if (node.kind == "boolean" and node.name == "union") or node.kind == "transform":
                candidates.setdefault(nid, set()).add(leaf.id)
            nid = parents.get(nid)

    # a transform chain over a single union covers the same leaves at every
    # level; keep only the outermost node of each identical-coverage group
    by_cover: dict[frozenset, list[int]] = {}
    for nid, cover in candidates.items():
        by_cover.setdefault(frozenset(cover), []).append(nid)
    composite_nodes = sorted(
        (min(nids, key=lambda n: order[n]) for nids in by_cover.values()),
        key=lambda n: order[n],
    )

    blocks: dict[int, CodeBlock] = {b.id: b for b in leaves}
    next_id = max(blocks, default=-1) + 1
    node_to_block: dict[int, int] = {b.ast_node: b.id for b in leaves}
    for nid in composite_nodes:
        blocks[next_id] = CodeBlock(id=next_id, kind="composite",
                                    span=tree.nodes[nid].span, ast_node=nid)
        node_to_block[nid] = next_id
        next_id += 1

    # parent links: nearest commentable ancestor in the ast
    for block in blocks.values():
        nid = parents.get(block.ast_node)
        while nid is not None:
            if nid in node_to_block:
                block.parent = node_to_block[nid]
                break
            nid = parents.get(nid)

    for block in sorted(blocks.values(), key=lambda b: order[b.ast_node]):
        if block.parent is not None:
            blocks[block.parent].children.append(block.id)
    roots = [b.id for b in sorted(blocks.values(), key=lambda b: order[b.ast_node])
             if b.parent is None]
    return BlockSet(blocks=blocks, roots=roots)


def extract_blocks(tree: SyntaxTree) -> BlockSet:
    return collect_commentable_blocks(find_irreducible_blocks(tree), tree)


def _line_indent(line: str) -> str:
    return line[: len(line) - len(line.lstrip())]


def insert_comments(source: SourceFile, bs: BlockSet, assignment: BlockAssignment,
                    warnings: Optional[list[str]] = None) -> SourceFile:
    """Emit `// label` lines above every labeled block, replacing stale ones.

    A block whose assigned list is empty is left untouched (no comment added,
    any existing one preserved); the "unlabeled" sentinel is written out like
    a normal label but recorded as a warning.
    """
    missing = [b.id for b in bs.in_source_order() if b.id not in assignment.labels]
    if missing:
        raise ValueError(f"assignment missing labels for blocks {missing}")

    by_line: dict[int, list[str]] = {}
    for block in bs.in_source_order():
        labels = assignment.labels[block.id]
        if not labels:
            continue
        if UNLABELED in labels and warnings is not None:
            warnings.append(f"block {block.id} at line {block.span[0]} is unlabeled")
        slot = by_line.setdefault(block.span[0], [])
        for lab in labels:
            if lab not in slot:
                slot.append(lab)

    lines = [source.line(i) for i in range(1, source.num_lines + 1)]
    out: list[str] = []
    for i, line in enumerate(lines, start=1):
        if GENERATED_COMMENT_RE.match(line) and i + 1 in by_line:
            continue  # replaced by the freshly generated comment below
        if i in by_line:
            out.append(f"{_line_indent(line)}// {', '.join(by_line[i])}")
        out.append(line)
    return SourceFile.from_text("\n".join(out) + "\n", source.path)


def read_ground_truth(source: SourceFile, bs: BlockSet) -> BlockAssignment:
    """Read `// l1, l2` comment lines directly above each block as its labels."""
    assignment = BlockAssignment()
    lines = [source.line(i) for i in range(1, source.num_lines + 1)]
    for block in bs.in_source_order():
        labels: list[str] = []
        row = block.span[0] - 1
        while row >= 1:
            line = lines[row - 1]
            m = COMMENT_LINE_RE.match(line)
            if m:
                body = m.group(1).strip()
                if not re.search(r"\w", body):
                    raise MalformedCommentError(row)
                labels = [part.strip().lower() for part in body.split(",") if part.strip()]
                break
            if line.strip() == "":
                row -= 1
                continue
            break
        assignment.labels[block.id] = labels
        assignment.scores[block.id] = 0.0
    return assignment

"""Statement-level feature extraction.

Each statement yields five raw views that the encoders consume:

  1. sub-tokens of its identifiers (variables, called methods, type names),
  2. its AST subtree,
  3. names and declared types of the variables it touches,
  4. the statements it shares a data dependence with, and
  5. the statements it shares a control dependence with.

Identifiers are split at case changes, letter/digit boundaries and
underscores, lowercased, with single-character pieces dropped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import VocabularyError
from .frontend.lexer import KEYWORDS
from .frontend.pdg import Pdg, recover_decl_types

PAD_ID = 0
UNK_ID = 1
CONTEXT_CAP = 8  # nearest-by-index statements kept per dependence direction pair

_CAMEL = re.compile(
    r"[A-Z]+(?![a-z])|[A-Z][a-z]*|[a-z]+|[0-9]+"
)


def split_identifier(name: str) -> list[str]:
    """Sub-token split: case/digit/underscore boundaries, lowercased,
    single-character pieces dropped."""
    pieces: list[str] = []
    for chunk in re.split(r"[^0-9A-Za-z]+", name):
        if chunk:
            pieces.extend(_CAMEL.findall(chunk))
    return [p.lower() for p in pieces if len(p) > 1]


@dataclass
class StatementFeatureBundle:
    index: int
    subtokens: list[str]
    ast: list
    var_names: list[list[str]]
    var_types: list[list[str]]
    data_ctx: list[int]
    ctrl_ctx: list[int]


def _type_words(type_text: str) -> list[str]:
    return [w for w in type_text.replace("*", " ").split() if w]


def statement_identifiers(kind: str, ast) -> list[str]:
    """Identifier tokens of a statement in source order: variable names,
    called method names, and non-keyword type names. Literals, jump labels
    and keywords contribute nothing."""
    out: list[str] = []

    def walk(node):
        label, children = node[0], node[1]
        if label.startswith("id:"):
            out.append(label[3:])
        elif label.startswith("call:"):
            out.append(label[5:])
        elif label.startswith(("arrow:", "dot:")):
            walk(children[0])
            out.append(label.split(":", 1)[1])
            return
        elif label.startswith("type:"):
            out.extend(w for w in _type_words(label[5:]) if w not in KEYWORDS)
        for child in children:
            walk(child)

    if kind not in ("goto", "label", "block-enter"):
        walk(ast)
    return out


def normalize_ast_label(label: str) -> str:
    """Collapse literal values to their literal class; keep other labels."""
    if label.startswith("int:"):
        return "intlit"
    if label.startswith("str:"):
        return "strlit"
    if label.startswith("char:"):
        return "charlit"
    return label


def ast_vocab_labels(ast) -> list[str]:
    """AST node labels normalized for the vocabulary."""
    out: list[str] = []

    def walk(node):
        out.append(normalize_ast_label(node[0]))
        for child in node[1]:
            walk(child)

    walk(ast)
    return out


def _capped_context(neighbors: list[int], center: int) -> list[int]:
    nearest = sorted(neighbors, key=lambda j: (abs(j - center), j))[:CONTEXT_CAP]
    return sorted(nearest)


def extract_method_features(
    pdg: Pdg, decl_types: dict[str, str] | None = None
) -> list[StatementFeatureBundle]:
    if decl_types is None:
        decl_types = pdg.decl_types or recover_decl_types(pdg.nodes)
    bundles = []
    for node in pdg.nodes:
        variables = sorted(set(node.defs) | set(node.uses))
        var_names = [split_identifier(v) for v in variables]
        var_types = [_type_words(decl_types.get(v, "UNK")) for v in variables]
        subtokens = []
        for ident in statement_identifiers(node.kind, node.ast):
            subtokens.extend(split_identifier(ident))
        bundles.append(
            StatementFeatureBundle(
                index=node.index,
                subtokens=subtokens,
                ast=node.ast,
                var_names=var_names,
                var_types=var_types,
                data_ctx=_capped_context(pdg.neighbors(node.index, "data"), node.index),
                ctrl_ctx=_capped_context(pdg.neighbors(node.index, "control"), node.index),
            )
        )
    return bundles


class Vocabulary:
    """Token table with reserved PAD=0 and UNK=1.

    Ids are assigned by descending count, ties broken lexicographically, so
    the table is a pure function of the training corpus.
    """

    def __init__(self, token_to_id: dict[str, int]):
        self.token_to_id = token_to_id

    def __len__(self) -> int:
        return len(self.token_to_id) + 2

    def id(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def to_dict(self) -> dict:
        return {"tokens": self.token_to_id}

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        tokens = data["tokens"]
        ids = sorted(tokens.values())
        if ids != list(range(2, 2 + len(ids))):
            raise VocabularyError("token ids must be dense starting at 2")
        return cls(dict(tokens))


def bundle_tokens(bundle: StatementFeatureBundle) -> list[str]:
    """Every vocabulary-relevant token of a bundle."""
    tokens = list(bundle.subtokens)
    for seq in bundle.var_names:
        tokens.extend(seq)
    for seq in bundle.var_types:
        tokens.extend(seq)
    tokens.extend(ast_vocab_labels(bundle.ast))
    return tokens


def build_vocabulary(bundle_lists: list[list[StatementFeatureBundle]]) -> Vocabulary:
    counts: dict[str, int] = {}
    for bundles in bundle_lists:
        for bundle in bundles:
            for token in bundle_tokens(bundle):
                counts[token] = counts.get(token, 0) + 1
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary({tok: i + 2 for i, (tok, _) in enumerate(ordered)})


def vectorize(tokens: list[str], vocab: Vocabulary, max_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-length id row plus 0/1 mask; the token prefix is kept when the
    sequence is longer than max_len."""
    if max_len < 1:
        raise VocabularyError("max_len must be >= 1")
    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    mask = np.zeros(max_len, dtype=np.float64)
    for i, token in enumerate(tokens[:max_len]):
        ids[i] = vocab.id(token)
        mask[i] = 1.0
    return ids, mask

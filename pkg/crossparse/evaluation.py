"""Attachment scores, error breakdowns and McNemar significance tests."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

from scipy.stats import binom, chi2

from crossparse.exception import DataError
from crossparse.treebank import ROOT, Sentence

logger = logging.getLogger(__name__)

PUNCT_TAGS = frozenset({"PUNCT", "."})
ROOT_TAG = "ROOT"


@dataclass
class PRF:
    """Counts behind precision, recall and f1 (reported as percentages)."""

    correct: int = 0
    predicted: int = 0
    gold: int = 0

    @property
    def frequency(self) -> int:
        return self.gold

    @property
    def precision(self) -> float:
        return 100.0 * self.correct / self.predicted if self.predicted else 0.0

    @property
    def recall(self) -> float:
        return 100.0 * self.correct / self.gold if self.gold else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass
class Accuracy:
    correct: int = 0
    total: int = 0

    @property
    def accuracy(self) -> float:
        return 100.0 * self.correct / self.total if self.total else 0.0


@dataclass
class EvalReport:
    """Scores of a parsed treebank against gold.

    Attributes:
        tokens: Number of scored tokens.
        head_correct: Tokens with the correct head.
        label_correct: Tokens with the correct head and label.
        exclude_punct: Whether punctuation was left out of scoring.
        per_label: Dependency label -> PRF.
        per_modifier_pos: Modifier UPOS -> head accuracy.
        per_head_pos: Head UPOS (``ROOT`` for the root) -> PRF.
    """

    tokens: int = 0
    head_correct: int = 0
    label_correct: int = 0
    exclude_punct: bool = False
    per_label: dict[str, PRF] = field(default_factory=dict)
    per_modifier_pos: dict[str, Accuracy] = field(default_factory=dict)
    per_head_pos: dict[str, PRF] = field(default_factory=dict)

    @property
    def uas(self) -> float:
        return 100.0 * self.head_correct / self.tokens if self.tokens else 0.0

    @property
    def las(self) -> float:
        return 100.0 * self.label_correct / self.tokens if self.tokens else 0.0


def _check_aligned(gold: Sequence[Sentence], *preds: Sequence[Sentence]) -> None:
    for pred in preds:
        if len(pred) != len(gold):
            raise DataError(f"{len(gold)} gold sentences but {len(pred)} predicted")
        for index, (g, p) in enumerate(zip(gold, pred, strict=True)):
            if len(g) != len(p):
                raise DataError(
                    f"sentence {index}: {len(g)} gold tokens but {len(p)} predicted"
                )


def _head_tag(sentence: Sentence, head: int | None) -> str | None:
    if head is None:
        return None
    return ROOT_TAG if head == ROOT else sentence[head].upos


def score(
    gold: Sequence[Sentence], pred: Sequence[Sentence], exclude_punct: bool = False
) -> EvalReport:
    """Compare predicted heads and labels to gold.

    Raises:
        DataError: Different numbers of sentences, or of tokens in a sentence.
    """
    gold, pred = list(gold), list(pred)
    _check_aligned(gold, pred)
    report = EvalReport(exclude_punct=exclude_punct)
    for g_sentence, p_sentence in zip(gold, pred, strict=True):
        for g, p in zip(g_sentence, p_sentence, strict=True):
            if exclude_punct and g.upos in PUNCT_TAGS:
                continue
            report.tokens += 1
            head_ok = p.head is not None and p.head == g.head
            label_ok = head_ok and p.deprel == g.deprel
            report.head_correct += head_ok
            report.label_correct += label_ok

            report.per_label.setdefault(g.deprel or "_", PRF()).gold += 1
            if p.deprel is not None:
                entry = report.per_label.setdefault(p.deprel, PRF())
                entry.predicted += 1
                entry.correct += label_ok

            modifier = report.per_modifier_pos.setdefault(g.upos, Accuracy())
            modifier.total += 1
            modifier.correct += head_ok

            gold_tag = _head_tag(g_sentence, g.head)
            if gold_tag is not None:
                report.per_head_pos.setdefault(gold_tag, PRF()).gold += 1
            pred_tag = _head_tag(p_sentence, p.head)
            if pred_tag is not None:
                entry = report.per_head_pos.setdefault(pred_tag, PRF())
                entry.predicted += 1
                entry.correct += head_ok
    logger.info("UAS %.2f LAS %.2f over %i tokens", report.uas, report.las, report.tokens)
    return report


def mcnemar_p(b: int, c: int, exact: bool = True) -> float:
    """Two-sided McNemar p-value from the discordant counts.

    The exact test is the binomial tail ``2 * P(X <= min(b, c))`` for
    ``X ~ Bin(b + c, 1/2)``, clamped to 1; the χ² variant uses the continuity
    correction.
    """
    n = b + c
    if n == 0 or b == c:
        return 1.0
    if exact:
        return min(1.0, 2.0 * float(binom.cdf(min(b, c), n, 0.5)))
    statistic = (abs(b - c) - 1) ** 2 / n
    return float(chi2.sf(statistic, 1))


def discordant_counts(
    gold: Sequence[Sentence],
    pred_a: Sequence[Sentence],
    pred_b: Sequence[Sentence],
    labeled: bool = False,
    exclude_punct: bool = False,
) -> tuple[int, int]:
    """(b, c): tokens only A gets right, tokens only B gets right."""
    gold, pred_a, pred_b = list(gold), list(pred_a), list(pred_b)
    _check_aligned(gold, pred_a, pred_b)
    b = c = 0
    for sentences in zip(gold, pred_a, pred_b, strict=True):
        for g, x, y in zip(*sentences, strict=True):
            if exclude_punct and g.upos in PUNCT_TAGS:
                continue
            x_ok = x.head == g.head and (not labeled or x.deprel == g.deprel)
            y_ok = y.head == g.head and (not labeled or y.deprel == g.deprel)
            b += x_ok and not y_ok
            c += y_ok and not x_ok
    return b, c


def mcnemar(
    gold: Sequence[Sentence],
    pred_a: Sequence[Sentence],
    pred_b: Sequence[Sentence],
    exact: bool = True,
    labeled: bool = False,
    exclude_punct: bool = False,
) -> float:
    """Token-level McNemar test between two parsers (head, or head+label, correctness).

    Raises:
        DataError: The three treebanks are not aligned.
    """
    b, c = discordant_counts(gold, pred_a, pred_b, labeled, exclude_punct)
    return mcnemar_p(b, c, exact)


def _rows(report: EvalReport) -> list[tuple[str, str, int, float, float, float]]:
    rows = []
    for label in sorted(report.per_label):
        prf = report.per_label[label]
        rows.append(("label", label, prf.frequency, prf.precision, prf.recall, prf.f1))
    for tag in sorted(report.per_modifier_pos):
        acc = report.per_modifier_pos[tag]
        rows.append(("modifier_pos", tag, acc.total, acc.accuracy, acc.accuracy, acc.accuracy))
    for tag in sorted(report.per_head_pos):
        prf = report.per_head_pos[tag]
        rows.append(("head_pos", tag, prf.frequency, prf.precision, prf.recall, prf.f1))
    return rows


def format_report(report: EvalReport) -> str:
    """Human-readable report."""
    lines = [
        f"UAS {report.uas:.1f}  LAS {report.las:.1f}  "
        f"tokens {report.tokens}  exclude_punct {report.exclude_punct}",
        "",
        f"{'':14}{'':12}{'freq':>7}{'prec':>8}{'rec':>8}{'f1':>8}",
    ]
    for section, key, frequency, precision, recall, f1 in _rows(report):
        lines.append(
            f"{section:14}{key:12}{frequency:>7}{precision:>8.1f}{recall:>8.1f}{f1:>8.1f}"
        )
    return "\n".join(lines) + "\n"


def report_to_tsv(report: EvalReport) -> str:
    """TSV report: a header comment with the totals, then one row per breakdown entry."""
    lines = [
        f"# uas={report.uas:.4f} las={report.las:.4f} tokens={report.tokens} "
        f"exclude_punct={str(report.exclude_punct).lower()}",
        "section\tkey\tfrequency\tprecision\trecall\tf1",
    ]
    for section, key, frequency, precision, recall, f1 in _rows(report):
        lines.append(f"{section}\t{key}\t{frequency}\t{precision:.4f}\t{recall:.4f}\t{f1:.4f}")
    return "\n".join(lines) + "\n"

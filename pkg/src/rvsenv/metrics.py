"""Evaluation metrics: distance-error suite, OOV analysis, ANOVA with FDR."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass

import numpy as np
from scipy.stats import f as f_dist

from .errors import DegenerateGroups, DuplicatePrediction, EmptyCorpus, MissingPrediction
from .geo import GeoPoint, haversine_distance

MAX_ERROR_M = 20_037_508.0
"""Sentinel error for unparseable predictions: half Earth circumference."""


@dataclass
class EvalReport:
    acc_100m: float
    acc_250m: float
    mean_err: float
    median_err: float
    max_err: float
    auc_err: float
    n: int

    def as_dict(self):
        return {
            "acc_100m": self.acc_100m,
            "acc_250m": self.acc_250m,
            "mean_err": self.mean_err,
            "median_err": self.median_err,
            "max_err": self.max_err,
            "auc_err": self.auc_err,
            "n": self.n,
        }

    def table(self, label="system"):
        """Aligned plain-text row with the six metric columns."""
        header = (f"{'Method':<12} {'100m Acc':>9} {'250m Acc':>9} "
                  f"{'Mean Err':>9} {'Median':>9} {'Max Err':>10} {'AUC':>6}")
        row = (f"{label:<12} {100 * self.acc_100m:>8.2f}% {100 * self.acc_250m:>8.2f}% "
               f"{self.mean_err:>9.0f} {self.median_err:>9.0f} "
               f"{self.max_err:>10.0f} {self.auc_err:>6.2f}")
        return header + "\n" + row


def accuracy_at(errors, threshold_m):
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        return 0.0
    return float(np.mean(errors <= threshold_m))


def auc_error(errors):
    """Normalized log-scale error area: mean ln(1+d) / ln(1+D_max), in [0, 1]."""
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        return 0.0
    return float(np.mean(np.log1p(errors)) / math.log1p(MAX_ERROR_M))


def error_distances(predictions, golds):
    """Per-example haversine errors matched by id.

    `predictions` maps id -> GeoPoint or None (None scores the sentinel
    MAX_ERROR_M, covering unparseable model output). `golds` is a sequence
    of objects with `.id` and `.goal`.
    """
    gold_ids = [g.id for g in golds]
    missing = set(gold_ids) - set(predictions)
    if missing:
        raise MissingPrediction(missing)
    errors = np.empty(len(golds), dtype=float)
    for k, gold in enumerate(golds):
        point = predictions[gold.id]
        errors[k] = MAX_ERROR_M if point is None else haversine_distance(point, gold.goal)
    return errors


def score(predictions, golds) -> EvalReport:
    """The six-metric report for a prediction map against gold examples."""
    errors = error_distances(predictions, golds)
    return EvalReport(
        acc_100m=accuracy_at(errors, 100.0),
        acc_250m=accuracy_at(errors, 250.0),
        mean_err=float(np.mean(errors)),
        median_err=float(np.median(errors)),
        max_err=float(np.max(errors)),
        auc_err=auc_error(errors),
        n=len(errors),
    )


def collect_predictions(pairs):
    """Build the id -> point map from (id, point) pairs, rejecting dups."""
    out = {}
    for pid, point in pairs:
        if pid in out:
            raise DuplicatePrediction(pid)
        out[pid] = point
    return out


# -- OOV ----------------------------------------------------------------------

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text):
    """Lowercase, split on non-alphanumerics."""
    return _TOKEN_RE.findall(text.lower())


def oov_analysis(corpus_a, corpus_b, top_k=5):
    """OOV fraction of corpus_b's vocabulary against corpus_a's, plus the
    most frequent OOV tokens with their corpus_b occurrence counts."""
    if not corpus_a or not corpus_b:
        raise EmptyCorpus("OOV analysis needs two non-empty corpora")
    vocab_a = set()
    for text in corpus_a:
        vocab_a.update(tokenize(text))
    counts_b = {}
    for text in corpus_b:
        for tok in tokenize(text):
            counts_b[tok] = counts_b.get(tok, 0) + 1
    if not vocab_a or not counts_b:
        raise EmptyCorpus("OOV analysis needs non-empty vocabularies")
    oov = {tok: cnt for tok, cnt in counts_b.items() if tok not in vocab_a}
    fraction = len(oov) / len(counts_b)
    top = sorted(oov.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
    return fraction, top


# -- ANOVA + FDR ----------------------------------------------------------------

def _one_way_anova(groups):
    """(F, p) for a label -> values map; conventions for degenerate data:
    zero variance everywhere gives F=0, p=1."""
    if len(groups) < 2 or any(len(v) < 2 for v in groups.values()):
        raise DegenerateGroups("need >= 2 groups with >= 2 values each")
    values = [np.asarray(v, dtype=float) for v in groups.values()]
    grand = np.mean(np.concatenate(values))
    ss_between = sum(len(v) * (v.mean() - grand) ** 2 for v in values)
    ss_within = sum(((v - v.mean()) ** 2).sum() for v in values)
    df_between = len(values) - 1
    df_within = sum(len(v) for v in values) - len(values)
    if ss_between <= 1e-300:
        return 0.0, 1.0
    if ss_within <= 1e-300:
        return math.inf, 0.0
    f_stat = (ss_between / df_between) / (ss_within / df_within)
    p = float(f_dist.sf(f_stat, df_between, df_within))
    return float(f_stat), p


def benjamini_hochberg(p_values):
    """Step-up adjusted p-values, same order as the input."""
    m = len(p_values)
    order = sorted(range(m), key=lambda i: p_values[i])
    adjusted = [0.0] * m
    running = 1.0
    for back, idx in enumerate(reversed(order)):
        rank = m - back
        running = min(running, p_values[idx] * m / rank)
        adjusted[idx] = running
    return adjusted


def anova_fdr(features):
    """Per-feature one-way ANOVA with BH correction across features.

    `features` maps feature name -> (group label -> list of values).
    Returns feature name -> {"F", "p", "p_fdr"}.
    """
    names = sorted(features)
    raw = {}
    for name in names:
        f_stat, p = _one_way_anova(features[name])
        raw[name] = (f_stat, p)
    adjusted = benjamini_hochberg([raw[name][1] for name in names])
    return {
        name: {"F": raw[name][0], "p": raw[name][1], "p_fdr": adj}
        for name, adj in zip(names, adjusted)
    }


def report_to_json(report: EvalReport, path, meta=None):
    payload = report.as_dict()
    payload["auc_formula"] = "mean(ln(1+d)) / ln(1+20037508)"
    if meta:
        payload["meta"] = meta
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)


def errors_to_csv(golds, errors, path):
    """Per-example error dump for plotting."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id,error_m\n")
        for gold, err in zip(golds, errors):
            fh.write(f"{gold.id},{err:.3f}\n")

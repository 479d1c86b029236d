"""Text-to-trajectory evaluation with a two-column MSE report.

The held-out set probes paraphrase generalization: every text is rendered
from a reserved template (or is a word-dropout variant of one), so none of
them can appear in any training corpus. Translation error is normalized by
the tokenizer's corpus translation std, which makes it directly comparable
to the tokenizer's own reconstruction floor; rotation error stays in square
degrees.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dataset import (
    RESERVED_TEMPLATES,
    canonical_primitive,
    gen_primitive,
    render_with_template,
    text_variants,
    translation_protocol,
)
from .geometry import Trajectory, resample, trajectory_mse
from .gpt import SamplerParams, TransformerLM, generate_trajectory
from .tokenizer import TokenizerNet, reconstruction_trans_mse


@dataclass(frozen=True)
class EvalPair:
    text: str
    truth: Trajectory


@dataclass(frozen=True)
class EvalRow:
    text: str
    translation_mse: float  # normalized units^2
    rotation_mse: float  # deg^2


@dataclass(frozen=True)
class EvalReport:
    rows: tuple
    mean_translation_mse: float
    mean_rotation_mse: float
    tokenizer_floor: float


def training_pairs(m_frames: int = 120, duration_s: float = 4.0) -> list:
    """The 16 translation-protocol rows with their training texts."""
    return [
        EvalPair(text=text, truth=gen_primitive(p, m_frames, duration_s))
        for p, text, _ in translation_protocol()
    ]


def heldout_pairs(m_frames: int = 120, duration_s: float = 4.0) -> list:
    """32 deterministic held-out pairs, two per protocol row.

    Each row contributes its own cell under the kind's reserved template and
    the direction-flipped cell under the same reserved template. The static
    row has no direction to flip, so its second pair is a word-dropout
    variant of the reserved rendering.
    """
    pairs = []
    for p, _train_text, reserved in translation_protocol():
        truth = gen_primitive(p, m_frames, duration_s)
        pairs.append(EvalPair(text=reserved, truth=truth))
        if p.kind == "static":
            rng = np.random.default_rng([2024, 11])
            variant = text_variants(reserved, 8, rng)[0]
            pairs.append(EvalPair(text=variant, truth=truth))
        else:
            q = canonical_primitive(p.kind, -p.direction, p.speed_class)
            pairs.append(
                EvalPair(
                    text=render_with_template(q, RESERVED_TEMPLATES[q.kind]),
                    truth=gen_primitive(q, m_frames, duration_s),
                )
            )
    return pairs


def evaluate_pairs(
    tok: TokenizerNet,
    model: TransformerLM,
    pairs: Sequence[EvalPair],
    sampler: Optional[SamplerParams] = None,
) -> EvalReport:
    """Generate from each text and score against its ground truth.

    Generated trajectories are resampled to the ground-truth frame count
    when lengths differ, so the metric never depends on emitted length.
    """
    sampler = sampler or SamplerParams()
    std2 = float(tok.trans_std) ** 2
    rows = []
    floors = []
    for pair in pairs:
        gen = generate_trajectory(model, tok, pair.text, sampler).trajectory
        if len(gen) != len(pair.truth):
            gen = resample(gen, len(pair.truth))
        t_mse, r_mse = trajectory_mse(gen, pair.truth)
        rows.append(
            EvalRow(text=pair.text, translation_mse=t_mse / std2, rotation_mse=r_mse)
        )
        floors.append(reconstruction_trans_mse(tok, pair.truth))
    return EvalReport(
        rows=tuple(rows),
        mean_translation_mse=float(np.mean([r.translation_mse for r in rows])),
        mean_rotation_mse=float(np.mean([r.rotation_mse for r in rows])),
        tokenizer_floor=float(np.mean(floors)),
    )


def format_report(report: EvalReport) -> str:
    """Plain-text table with the two headline metric columns."""
    width = max(len(r.text) for r in report.rows)
    width = max(width, len("mean"))
    head = f"{'Prompt':<{width}}  {'Translation MSE':>15}  {'Rotation MSE':>12}"
    lines = [head, "-" * len(head)]
    for r in report.rows:
        lines.append(
            f"{r.text:<{width}}  {r.translation_mse:>15.4f}  {r.rotation_mse:>12.4f}"
        )
    lines.append("-" * len(head))
    lines.append(
        f"{'mean':<{width}}  {report.mean_translation_mse:>15.4f}"
        f"  {report.mean_rotation_mse:>12.4f}"
    )
    ratio = report.mean_translation_mse / max(report.tokenizer_floor, 1e-12)
    lines.append(
        f"tokenizer reconstruction floor {report.tokenizer_floor:.4f}"
        f"  (mean translation MSE = {ratio:.2f}x floor)"
    )
    return "\n".join(lines)


def report_to_dict(report: EvalReport) -> dict:
    return {
        "rows": [
            {
                "text": r.text,
                "translation_mse": r.translation_mse,
                "rotation_mse": r.rotation_mse,
            }
            for r in report.rows
        ],
        "mean_translation_mse": report.mean_translation_mse,
        "mean_rotation_mse": report.mean_rotation_mse,
        "tokenizer_floor": report.tokenizer_floor,
    }

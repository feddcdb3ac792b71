"""Experiment configuration.

Plain INI-style text files (configparser) describe the codec, the
predictor, the edit, and an optional sweep.  A canonical re-rendering
of the parsed values is hashed into a 16-byte digest that every output
artifact embeds, so results are traceable to their exact configuration.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, replace
from typing import Optional

from .codec import Codebook, ScaleSchedule, default_codebook
from .editing import CONTEXT_GENERATED, EditConfig, LambdaSchedule
from .errors import ValidationError
from .predictor import PredictorParams

EDIT_MODES = ("varin", "regen", "target-only")


@dataclass(frozen=True)
class CodecSection:
    dim: int = 4
    vocab: int = 64
    schedule: tuple[tuple[int, int], ...] = ((1, 1), (2, 2), (4, 4), (8, 8), (16, 16))
    codebook_seed: int = 101


@dataclass(frozen=True)
class PredictorSection:
    beta: float = 4.0
    cond_gain: float = 0.5
    model_seed: int = 7


@dataclass(frozen=True)
class EditSection:
    source_label: str = "red brick house among pines"
    target_label: str = "blue glass tower among pines"
    start_scale: Optional[int] = None
    tau: Optional[float] = None
    lambda_kind: str = "linear"
    lambda_value: float = 1.0
    seed: int = 0
    context_mode: str = CONTEXT_GENERATED
    mode: str = "varin"

    def __post_init__(self):
        if self.mode not in EDIT_MODES:
            raise ValidationError(f"mode must be one of {EDIT_MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class SweepSection:
    parameter: str = ""
    values: tuple[float, ...] = ()
    seeds: tuple[int, ...] = ()


@dataclass(frozen=True)
class ExperimentConfig:
    codec: CodecSection = field(default_factory=CodecSection)
    predictor: PredictorSection = field(default_factory=PredictorSection)
    edit: EditSection = field(default_factory=EditSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    output_dir: str = "out"

    def build_codebook(self) -> Codebook:
        return default_codebook(
            size=self.codec.vocab, dim=self.codec.dim, seed=self.codec.codebook_seed
        )

    def build_schedule(self) -> ScaleSchedule:
        return ScaleSchedule(self.codec.schedule)

    def build_params(self) -> PredictorParams:
        return PredictorParams(
            codebook=self.build_codebook(),
            schedule=self.build_schedule(),
            model_seed=self.predictor.model_seed,
            beta=self.predictor.beta,
            cond_gain=self.predictor.cond_gain,
        )

    def build_edit_config(self) -> EditConfig:
        e = self.edit
        return EditConfig(
            source_label=e.source_label,
            target_label=e.target_label,
            start_scale=e.start_scale,
            tau=e.tau,
            lambda_schedule=LambdaSchedule(kind=e.lambda_kind, value=e.lambda_value),
            seed=e.seed,
            context_mode=e.context_mode,
        )


def _parse_schedule(text: str) -> tuple[tuple[int, int], ...]:
    """"1,2,4,8,16" (square) or "1x1,2x2,...,16x16"."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "x" in part:
            h, w = part.split("x")
            out.append((int(h), int(w)))
        else:
            out.append((int(part), int(part)))
    if not out:
        raise ValidationError("schedule must list at least one resolution")
    return tuple(out)


def _render_schedule(schedule) -> str:
    return ",".join(f"{h}x{w}" for h, w in schedule)


def _parse_seeds(text: str) -> tuple[int, ...]:
    """Comma list ("0,1,2") or half-open range ("0:32")."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        lo, hi = text.split(":")
        return tuple(range(int(lo), int(hi)))
    return tuple(int(p) for p in text.split(",") if p.strip())


def _parse_values(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(",") if p.strip())


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ValidationError(f"malformed config: {exc}") from exc
    try:
        return _from_parser(parser)
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed config: {exc}") from exc


def _from_parser(parser: configparser.ConfigParser) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if parser.has_section("codec"):
        s = parser["codec"]
        cfg = replace(
            cfg,
            codec=CodecSection(
                dim=s.getint("dim", cfg.codec.dim),
                vocab=s.getint("vocab", cfg.codec.vocab),
                schedule=_parse_schedule(s.get("schedule", _render_schedule(cfg.codec.schedule))),
                codebook_seed=s.getint("codebook_seed", cfg.codec.codebook_seed),
            ),
        )
    if parser.has_section("predictor"):
        s = parser["predictor"]
        cfg = replace(
            cfg,
            predictor=PredictorSection(
                beta=s.getfloat("beta", cfg.predictor.beta),
                cond_gain=s.getfloat("cond_gain", cfg.predictor.cond_gain),
                model_seed=s.getint("model_seed", cfg.predictor.model_seed),
            ),
        )
    if parser.has_section("edit"):
        s = parser["edit"]
        start = s.get("start_scale", "")
        tau = s.get("tau", "")
        cfg = replace(
            cfg,
            edit=EditSection(
                source_label=s.get("source", cfg.edit.source_label),
                target_label=s.get("target", cfg.edit.target_label),
                start_scale=int(start) if start else None,
                tau=float(tau) if tau else None,
                lambda_kind=s.get("lambda_kind", cfg.edit.lambda_kind),
                lambda_value=s.getfloat("lambda_value", cfg.edit.lambda_value),
                seed=s.getint("seed", cfg.edit.seed),
                context_mode=s.get("context", cfg.edit.context_mode),
                mode=s.get("mode", cfg.edit.mode),
            ),
        )
    if parser.has_section("sweep"):
        s = parser["sweep"]
        cfg = replace(
            cfg,
            sweep=SweepSection(
                parameter=s.get("parameter", ""),
                values=_parse_values(s.get("values", "")),
                seeds=_parse_seeds(s.get("seeds", "")),
            ),
        )
    if parser.has_section("output"):
        cfg = replace(cfg, output_dir=parser["output"].get("dir", cfg.output_dir))
    return cfg


def render_config(cfg: ExperimentConfig, include_output: bool = True) -> str:
    """Canonical text form: fixed section/key order, normalized values."""
    buf = io.StringIO()
    buf.write("[codec]\n")
    buf.write(f"dim = {cfg.codec.dim}\n")
    buf.write(f"vocab = {cfg.codec.vocab}\n")
    buf.write(f"schedule = {_render_schedule(cfg.codec.schedule)}\n")
    buf.write(f"codebook_seed = {cfg.codec.codebook_seed}\n\n")
    buf.write("[predictor]\n")
    buf.write(f"beta = {cfg.predictor.beta!r}\n")
    buf.write(f"cond_gain = {cfg.predictor.cond_gain!r}\n")
    buf.write(f"model_seed = {cfg.predictor.model_seed}\n\n")
    e = cfg.edit
    buf.write("[edit]\n")
    buf.write(f"source = {e.source_label}\n")
    buf.write(f"target = {e.target_label}\n")
    buf.write(f"start_scale = {'' if e.start_scale is None else e.start_scale}\n")
    buf.write(f"tau = {'' if e.tau is None else repr(float(e.tau))}\n")
    buf.write(f"lambda_kind = {e.lambda_kind}\n")
    buf.write(f"lambda_value = {e.lambda_value!r}\n")
    buf.write(f"seed = {e.seed}\n")
    buf.write(f"context = {e.context_mode}\n")
    buf.write(f"mode = {e.mode}\n\n")
    s = cfg.sweep
    buf.write("[sweep]\n")
    buf.write(f"parameter = {s.parameter}\n")
    buf.write(f"values = {','.join(repr(v) for v in s.values)}\n")
    buf.write(f"seeds = {','.join(str(x) for x in s.seeds)}\n\n")
    if include_output:
        buf.write("[output]\n")
        buf.write(f"dir = {cfg.output_dir}\n")
    return buf.getvalue()


def config_digest(cfg: ExperimentConfig) -> bytes:
    """16-byte digest of the canonical rendering.

    The output directory is excluded: it routes artifacts but does not
    shape them, and the same experiment must hash identically wherever
    its files land.
    """
    return hashlib.sha256(render_config(cfg, include_output=False).encode("utf-8")).digest()[:16]


def write_config(cfg: ExperimentConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_config(cfg))

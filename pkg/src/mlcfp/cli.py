"""Command-line entry point: ``mlcfp {synth,degrade,analyze,estimate,eval,search}``.

Settings come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines, then command-line flags of the same names.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import io as mio
from .cfp import LogFreqBank, fuse_stack, project_to_bands
from .degrade import ButterworthSpec, DegradeSpec, build_simulation, degrade
from .evaluation import (
    PianoRoll,
    evaluate,
    read_annotation,
    rows_to_roll,
    scores,
    write_predictions,
)
from .mlc import MlcConfig, compute_stack
from .pipeline import Analysis, estimate, load_dataset
from .quartet import synth_quartet
from .search import (
    BRUTE_GRID,
    GREEDY_GRID,
    SearchSpace,
    SgdConfig,
    brute_force,
    greedy,
    sgd_train,
)
from .signal import WindowSpec

log = logging.getLogger("mlcfp")


class CliError(Exception):
    def __init__(self, category: str, message: str, code: int):
        super().__init__(message)
        self.category = category
        self.code = code


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _opt_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none", "off") else float(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    # analysis
    dft_size: int = 7939
    window_length: int = 0  # 0 = dft_size
    window: str = "blackman_harris"
    hop_seconds: float = 0.01
    gammas: tuple[float, ...] = (0.24, 0.6, 1.0)
    cutoff_frequency_hz: float = 27.5
    cutoff_quefrency_s: float = 0.24e-3
    threshold_ratio: float = 0.1
    chunk: int = 256
    # synthesis / degradation
    recipe: str = "simulation"
    fs: float = 1000.0
    duration: float = 100.0
    filter_kind: str = "none"
    filter_order: int = 4
    filter_cutoff_hz: float = 1000.0
    snr_db: float | None = 10.0
    impulse_seconds: float | None = 80.0
    impulse_amplitude: float | None = None
    wav_format: str = "float32"
    # search
    mode: str = "brute"
    num_layers: int = 1
    grid: tuple[float, ...] = BRUTE_GRID
    greedy_grid: tuple[float, ...] = GREEDY_GRID
    terminal_gamma: float = 1.0
    workers: int = 1
    folds: int = 10
    learning_rate: float = 0.1
    batch_size: int = 256
    max_epochs: int = 40
    # data
    midi_values: bool = False
    eval_hop_seconds: float = 0.01
    output_dir: str = "out"
    seed: int = 0

    _parsers = {
        "gammas": _floats, "grid": _floats, "greedy_grid": _floats,
        "snr_db": _opt_float, "impulse_seconds": _opt_float,
        "impulse_amplitude": _opt_float, "midi_values": _bool,
    }

    @classmethod
    def from_sources(cls, *sources: dict[str, str]) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        values = {}
        for src in sources:
            for key, raw in src.items():
                if raw is None:
                    continue
                if key not in known:
                    raise CliError("config", f"unknown setting {key!r}", 2)
                parse = cls._parsers.get(key)
                if parse is None:
                    default = known[key].default
                    parse = type(default) if not isinstance(default, bool) else _bool
                try:
                    values[key] = parse(raw) if isinstance(raw, str) else raw
                except ValueError as exc:
                    raise CliError("config", f"bad value for {key}: {exc}", 2) from None
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def window_spec(self, fs: float) -> WindowSpec:
        return WindowSpec.from_seconds(fs, self.dft_size, self.hop_seconds,
                                       self.window_length or None, self.window)

    def mlc_config(self, fs: float, gammas=None) -> MlcConfig:
        cfg = MlcConfig(self.window_spec(fs), tuple(gammas or self.gammas),
                        self.cutoff_frequency_hz, self.cutoff_quefrency_s)
        cfg.cutoff_indices(fs)
        return cfg

    def filter_spec(self) -> ButterworthSpec | None:
        if self.filter_kind == "none":
            return None
        return ButterworthSpec(self.filter_order, self.filter_cutoff_hz, self.filter_kind)

    def validate(self) -> None:
        """Check module preconditions up front; raises :class:`CliError`."""
        try:
            WindowSpec(self.dft_size, 1, self.window_length or None, self.window)
            if self.hop_seconds <= 0:
                raise ValueError("hop_seconds must be positive")
            MlcConfig(WindowSpec(self.dft_size, 1), self.gammas,
                      self.cutoff_frequency_hz, self.cutoff_quefrency_s)
            if not 0 < self.threshold_ratio < 1:
                raise ValueError("threshold_ratio must be in (0, 1)")
            if self.filter_kind not in ("none", "lowpass", "highpass"):
                raise ValueError(f"filter_kind must be none/lowpass/highpass")
            self.filter_spec()
            if self.recipe not in ("simulation", "quartet"):
                raise ValueError("recipe must be simulation or quartet")
            if self.mode not in ("brute", "greedy", "sgd"):
                raise ValueError("mode must be brute, greedy or sgd")
            if self.num_layers < 1:
                raise ValueError("num_layers must be >= 1")
            if self.fs <= 0 or self.duration <= 0:
                raise ValueError("fs and duration must be positive")
            if self.workers < 1 or self.chunk < 1:
                raise ValueError("workers and chunk must be >= 1")
            if self.wav_format not in ("float32", "pcm16"):
                raise ValueError("wav_format must be float32 or pcm16")
            SearchSpace((self.grid, self.grid))
            SearchSpace((self.greedy_grid, (self.terminal_gamma,)))
            SgdConfig(self.learning_rate, self.batch_size, self.max_epochs)
        except ValueError as exc:
            raise CliError("config", str(exc), 2) from None


# --- commands ----------------------------------------------------------------


def _out(cfg: RunConfig) -> Path:
    d = Path(cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_synth(cfg: RunConfig, args) -> list[Path]:
    out = _out(cfg)
    if cfg.recipe == "quartet":
        q = synth_quartet(cfg.duration, cfg.fs, cfg.seed)
        mio.write_wav(out / "quartet.wav", q.signal, cfg.wav_format)
        (out / "quartet.txt").write_text(q.annotation_text())
        paths = [out / "quartet.wav", out / "quartet.txt"]
    else:
        sim = build_simulation(cfg.fs, cfg.duration, snr_db=cfg.snr_db,
                               impulse_seconds=cfg.impulse_seconds,
                               impulse_amplitude=cfg.impulse_amplitude, seed=cfg.seed)
        paths = []
        for name, sig in (("x1", sim.x1), ("x2", sim.x2), ("x", sim.clean),
                          ("x_tilde", sim.noisy)):
            p = out / f"{name}.wav"
            mio.write_wav(p, sig, cfg.wav_format)
            paths.append(p)
    for p in paths:
        print(p)
    return paths


def cmd_degrade(cfg: RunConfig, args) -> Path:
    x = mio.read_wav(args.input)
    spec = DegradeSpec(cfg.filter_spec(), cfg.snr_db, cfg.impulse_seconds,
                       cfg.impulse_amplitude, cfg.seed)
    try:
        y = degrade(x, spec)
    except ValueError as exc:
        raise CliError("config", str(exc), 2) from None
    path = Path(args.output) if args.output else _out(cfg) / (Path(args.input).stem + "_degraded.wav")
    path.parent.mkdir(parents=True, exist_ok=True)
    mio.write_wav(path, y, cfg.wav_format)
    print(path)
    return path


def cmd_analyze(cfg: RunConfig, args) -> list[Path]:
    x = mio.read_wav(args.input)
    config = cfg.mlc_config(x.sample_rate)
    if Analysis.build(config, x.sample_rate).num_frames(len(x)) < 1:
        raise CliError("input", f"{args.input}: signal shorter than one analysis window "
                       f"({config.window.window_length} samples)", 2)
    stack = compute_stack(x, config)
    out = _out(cfg)
    paths = []
    for l, z in enumerate(stack.layers):
        p = out / f"z{l}.csv"
        mio.write_spectrogram_csv(p, z)
        paths.append(p)
    if stack.num_layers >= 1:
        y = fuse_stack(stack)
        p = out / f"y{y.layers[0]}{y.layers[1]}.csv"
        mio.write_spectrogram_csv(p, y.as_spectrogram())
        paths.append(p)
        if args.salience:
            p = out / "salience.csv"
            mio.write_salience_csv(p, project_to_bands(y, LogFreqBank()),
                                   stack[0].frame_times())
            paths.append(p)
    for p in paths:
        print(p)
    return paths


def cmd_estimate(cfg: RunConfig, args) -> list[Path]:
    x = mio.read_wav(args.input)
    roll = estimate(x, cfg.mlc_config(x.sample_rate), cfg.threshold_ratio, cfg.chunk)
    out = _out(cfg)
    stem = Path(args.input).stem
    txt, csv_path = out / f"{stem}.pred.txt", out / f"{stem}.roll.csv"
    write_predictions(roll, txt)
    mio.write_roll_csv(csv_path, roll.active, roll.frame_times())
    print(txt)
    print(csv_path)
    return [txt, csv_path]


def _file_roll(path, hop: float, num_frames: int, midi_values: bool) -> PianoRoll:
    times, rows = read_annotation(path)
    return rows_to_roll(times, rows, hop, num_frames, 0.0, midi_values)


def cmd_eval(cfg: RunConfig, args):
    hop = cfg.eval_hop_seconds
    pt, _ = read_annotation(args.predictions)
    tt, _ = read_annotation(args.truth)
    m = int(np.floor(max(pt[-1], tt[-1]) / hop + 0.5)) + 1
    pred = _file_roll(args.predictions, hop, m, False)
    truth = _file_roll(args.truth, hop, m, cfg.midi_values)
    counts = evaluate(pred, truth)
    s = scores(counts)
    out = _out(cfg)
    (out / "counts.csv").write_text(
        "tp,fp,fn,precision,recall,f_score\n"
        f"{counts.tp},{counts.fp},{counts.fn},{s.precision:.6f},{s.recall:.6f},{s.f_score:.6f}\n")
    print(f"TP={counts.tp} FP={counts.fp} FN={counts.fn}")
    print(s)
    return s


def _table_summary(outcome, num_layers: int) -> str:
    head = "  ".join(f"g{i}" for i in range(num_layers + 1))
    lines = [f"method: {outcome.method}", f"layers: Z{num_layers - 1} & Z{num_layers}",
             f"{head}  P(%)  R(%)  F(%)"]
    b = outcome.best
    if b is not None:
        g = "  ".join(f"{v:g}" for v in b.gammas)
        lines.append(f"{g}  {100 * b.scores.precision:.2f}  {100 * b.scores.recall:.2f}  "
                     f"{100 * b.scores.f_score:.2f}")
    for l, r, n in outcome.trace:
        lines.append(f"step {l}: gamma_{l - 1}={r.gammas[l - 1]:g} over {n} points, "
                     f"F={100 * r.scores.f_score:.2f}%")
    if outcome.failures:
        lines.append(f"failed grid points: {len(outcome.failures)}")
    return "\n".join(lines) + "\n"


def cmd_search(cfg: RunConfig, args):
    pieces = load_dataset(args.dataset, cfg.mlc_config(_dataset_rate(args.dataset)),
                          cfg.midi_values)
    fs = pieces[0].signal.sample_rate
    out = _out(cfg)
    L = cfg.num_layers
    template = cfg.mlc_config(fs, cfg.gammas if len(cfg.gammas) == L + 1 else [1.0] * (L + 1))
    if cfg.mode == "sgd":
        sgd = SgdConfig(cfg.learning_rate, cfg.batch_size, cfg.max_epochs,
                        cfg.gammas if len(cfg.gammas) == L + 1 else None, seed=cfg.seed)
        res = sgd_train(sgd, pieces, template, min(cfg.folds, len(pieces)))
        rows = ["fold,test," + ",".join(f"g{i}" for i in range(L + 1)) + ",tp,fp,fn"]
        for i, f in enumerate(res.folds):
            rows.append(f"{i},{' '.join(f.test)}," + ",".join(f"{g:.6f}" for g in f.gammas)
                        + f",{f.counts.tp},{f.counts.fp},{f.counts.fn}")
        (out / "search.csv").write_text("\n".join(rows) + "\n")
        summary = (f"method: sgd ({len(res.folds)}-fold)\nlayers: Z{L - 1} & Z{L}\n"
                   f"pooled {res.scores}\n")
    else:
        if cfg.mode == "brute":
            space = SearchSpace.brute(L, cfg.grid)
            outcome = brute_force(space, pieces, template, cfg.threshold_ratio, cfg.chunk,
                                  cfg.workers)
        else:
            space = SearchSpace.greedy(L, cfg.greedy_grid, cfg.terminal_gamma)
            outcome = greedy(space, pieces, template, cfg.threshold_ratio, cfg.chunk,
                             cfg.workers)
        rows = [",".join(f"g{i}" for i in range(L + 1)) + ",precision,recall,f_score"]
        for r in outcome.table:
            rows.append(",".join(f"{g:g}" for g in r.gammas)
                        + f",{r.scores.precision:.6f},{r.scores.recall:.6f},{r.scores.f_score:.6f}")
        (out / "search.csv").write_text("\n".join(rows) + "\n")
        summary = _table_summary(outcome, L)
    (out / "summary.txt").write_text(summary)
    print(summary, end="")
    return summary


def _dataset_rate(directory) -> float:
    wavs = sorted(Path(directory).glob("*.wav"))
    if not wavs:
        raise CliError("input", f"no .wav files in {directory}", 3)
    return mio.read_wav(wavs[0]).sample_rate


# --- argument parsing --------------------------------------------------------

_COMMANDS = {
    "synth": (cmd_synth, "write the simulation signals or a synthetic quartet"),
    "degrade": (cmd_degrade, "filter / add noise / add an impulse to a WAV file"),
    "analyze": (cmd_analyze, "dump layers, fused representation and salience as CSV"),
    "estimate": (cmd_estimate, "write frame-level pitch estimates for a WAV file"),
    "eval": (cmd_eval, "score predictions against an annotation file"),
    "search": (cmd_search, "search layer exponents on a dataset directory"),
}


def _add_settings(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("settings (override --config)")
    for f in fields(RunConfig):
        if f.name.startswith("_"):
            continue
        g.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, default=None,
                       metavar="VALUE")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlcfp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key = value settings file")
        if name in ("degrade", "analyze", "estimate"):
            p.add_argument("input", help="input WAV file")
        if name == "degrade":
            p.add_argument("-o", "--output", help="output WAV (default: output_dir)")
        if name == "analyze":
            p.add_argument("--no-salience", dest="salience", action="store_false")
        if name == "eval":
            p.add_argument("predictions")
            p.add_argument("truth")
        if name == "search":
            p.add_argument("dataset", help="directory of X.wav / X.txt pairs")
        _add_settings(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        file_values = mio.read_config(args.config) if args.config else {}
        flag_values = {f.name: getattr(args, f.name) for f in fields(RunConfig)
                       if not f.name.startswith("_") and getattr(args, f.name, None) is not None}
        cfg = RunConfig.from_sources(file_values, flag_values)
        _COMMANDS[args.command][0](cfg, args)
    except CliError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return exc.code
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error[input]: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, RuntimeError) as exc:
        print(f"error[compute]: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())

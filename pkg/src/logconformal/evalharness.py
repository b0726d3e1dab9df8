"""Desk-scale evaluation: corpus synthesis, metrics, significance sweep.

The generator produces labeled corpora with a fixed header layout, a dozen
or more normal event shapes with variable fields, and three kinds of
planted anomalies: a file error, a data-completeness check error, and
structurally mutated lines. Everything is driven by one seed and is
byte-reproducible.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from .conformal import CalibrationModel, pvalues_for
from .detector import ANOMALY, NORMAL, Verdict
from .errors import InvalidSpec, LabelMismatch
from .ingest import HeaderSchema, LogRecord, compile_schema, read_records


# ---------------------------------------------------------------------------
# Corpus profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EventSpec:
    weight: int
    content: str        # str.format template with {} slots
    fields: tuple = ()  # ("int", lo, hi) | ("pick", options) | ("pair", pairs)


@dataclass(frozen=True)
class CorpusProfile:
    name: str
    format_template: str
    mask_rules: tuple[tuple[str, str], ...]
    events: tuple[EventSpec, ...]


_NOTE_WORDS = tuple(a + b for a in ("ka", "ro", "mi", "ta", "zu", "ne", "lo",
                                    "vi", "sa", "du", "pe", "go", "fi", "nu")
                    for b in ("ra", "mo", "ki", "tu", "ze", "na", "li", "vo",
                              "su", "da", "po", "ge", "fa", "ni"))

_MASK_NUM = (r"(?<![\w.])-?\d+(?![\w.])", "<*>")
_MASK_HEX = (r"0x[0-9a-fA-F]+", "<*>")
_MASK_IP = (r"\d{1,3}\.\d{1,3}\.\d{1,3}\.\d{1,3}(:\d+)?", "<*>")
_MASK_BLK = (r"(?<!\w)blk_-?\d+", "<*>")

IIOT_PROFILE = CorpusProfile(
    name="iiot",
    format_template="<Date> <Time> <SysId> <Eth> <Content>",
    mask_rules=(_MASK_IP, _MASK_HEX, _MASK_NUM),
    events=(
        EventSpec(8, "check data complete ok"),
        EventSpec(8, "Load {}.ini ok", (("pick", ("cfg", "sys", "net", "core", "link")),)),
        EventSpec(10, "Send telemetry frame {} to gateway {}",
                  (("int", 1, 9999), ("int", 1, 8))),
        EventSpec(8, "Receive command packet {} from controller {}",
                  (("int", 1, 9999), ("pick", ("CTRL-A", "CTRL-B", "CTRL-C")))),
        EventSpec(8, "Pump pressure reading {} within range", (("int", 10, 500),)),
        EventSpec(8, "Valve {} position set to {}",
                  (("pick", ("VLV-A", "VLV-B", "VLV-C", "VLV-D")), ("int", 0, 100))),
        EventSpec(10, "Heartbeat sequence {} acknowledged", (("int", 1, 99999),)),
        EventSpec(8, "Sensor {} calibration cycle {} complete",
                  (("pick", ("SA", "SB", "SC", "SD", "SE", "SF")), ("int", 1, 999))),
        EventSpec(8, "Write archive segment {} to disk volume {}",
                  (("int", 1, 9999), ("pick", ("VOLA", "VOLB")))),
        EventSpec(8, "Link quality index {} on port {}",
                  (("int", 0, 100), ("pick", ("PA", "PB", "PC", "PD")))),
        EventSpec(8, "Temperature probe {} reports {} centigrade",
                  (("pick", ("SA", "SB", "SC", "SD", "SE", "SF")), ("int", 5, 90))),
        EventSpec(4, "Operator note {}", (("pick", _NOTE_WORDS),)),
        EventSpec(4, "Array {} mirrors volume {}",
                  (("pair", (("AA", "VA"), ("AB", "VB"), ("AC", "VC"))),)),
    ),
)

HDFS_PROFILE = CorpusProfile(
    name="hdfs",
    format_template="<Date> <Time> <Pid> <Level> <Component>: <Content>",
    mask_rules=(_MASK_BLK, _MASK_IP, _MASK_HEX, _MASK_NUM),
    events=(
        EventSpec(10, "Receiving block blk_{} src: /10.251.{}.{}:{} dest: /10.251.{}.{}:{}",
                  (("int", 10 ** 9, 9 * 10 ** 9), ("int", 0, 255), ("int", 0, 255),
                   ("int", 50010, 50100), ("int", 0, 255), ("int", 0, 255),
                   ("int", 50010, 50100))),
        EventSpec(10, "PacketResponder {} for block blk_{} terminating",
                  (("int", 0, 3), ("int", 10 ** 9, 9 * 10 ** 9))),
        EventSpec(10, "Received block blk_{} of size {} from /10.251.{}.{}",
                  (("int", 10 ** 9, 9 * 10 ** 9), ("int", 1024, 67108864),
                   ("int", 0, 255), ("int", 0, 255))),
        EventSpec(10, "BLOCK* NameSystem.addStoredBlock: blockMap updated: "
                      "10.251.{}.{}:{} is added to blk_{} size {}",
                  (("int", 0, 255), ("int", 0, 255), ("int", 50010, 50100),
                   ("int", 10 ** 9, 9 * 10 ** 9), ("int", 1024, 67108864))),
        EventSpec(8, "Verification succeeded for blk_{}",
                  (("int", 10 ** 9, 9 * 10 ** 9),)),
        EventSpec(8, "Deleting block blk_{} file /mnt/hadoop/dfs/data/current/blk_{}",
                  (("int", 10 ** 9, 9 * 10 ** 9), ("int", 10 ** 9, 9 * 10 ** 9))),
        EventSpec(8, "BLOCK* NameSystem.allocateBlock: "
                     "/mnt/hadoop/mapred/system/job_{}_{}/job.jar. blk_{}",
                  (("int", 200811100000, 200811109999), ("int", 1, 9999),
                   ("int", 10 ** 9, 9 * 10 ** 9))),
        EventSpec(8, "Starting thread to transfer block blk_{} to 10.251.{}.{}:{}",
                  (("int", 10 ** 9, 9 * 10 ** 9), ("int", 0, 255), ("int", 0, 255),
                   ("int", 50010, 50100))),
        EventSpec(6, "Got exception while serving blk_{} to /10.251.{}.{}:{}",
                  (("int", 10 ** 9, 9 * 10 ** 9), ("int", 0, 255), ("int", 0, 255),
                   ("int", 50010, 50100))),
    ),
)

PROFILES = {"iiot": IIOT_PROFILE, "hdfs": HDFS_PROFILE}


def _fill_fields(rng: random.Random, spec: EventSpec) -> str:
    values: list[str] = []
    for f in spec.fields:
        kind = f[0]
        if kind == "int":
            values.append(str(rng.randint(f[1], f[2])))
        elif kind == "pick":
            values.append(rng.choice(f[1]))
        elif kind == "pair":
            values.extend(rng.choice(f[1]))
        else:
            raise InvalidSpec(f"unknown field kind {kind!r}")
    return spec.content.format(*values)


def _pick_event(rng: random.Random, profile: CorpusProfile) -> EventSpec:
    total = sum(e.weight for e in profile.events)
    roll = rng.randrange(total)
    acc = 0
    for event in profile.events:
        acc += event.weight
        if roll < acc:
            return event
    return profile.events[-1]


def _normal_content(rng: random.Random, profile: CorpusProfile) -> str:
    return _fill_fields(rng, _pick_event(rng, profile))


def _mutant_content(rng: random.Random, profile: CorpusProfile) -> str:
    tokens = _normal_content(rng, profile).split()
    tokens.reverse()
    return "fault trap " + " ".join(tokens)


def _anomaly_content(rng: random.Random, profile: CorpusProfile, ordinal: int) -> str:
    if profile.name == "hdfs":
        if ordinal % 5 == 0:
            return _mutant_content(rng, profile)
        return ("10.251.{}.{}:Throw error while serving blk {} from /10.251.{}.{}"
                .format(rng.randint(0, 255), rng.randint(0, 255),
                        rng.randint(10 ** 9, 9 * 10 ** 9),
                        rng.randint(0, 255), rng.randint(0, 255)))
    if ordinal == 1:
        return "Load {}.ini failed!".format(
            rng.choice(("cfg", "sys", "net", "core", "link")))
    if ordinal % 10 == 0:
        return _mutant_content(rng, profile)
    return "check data complete failed!"


def _header(rng: random.Random, profile: CorpusProfile, line_no: int) -> str:
    second = line_no % 86400
    clock = f"{second // 3600:02d}:{second % 3600 // 60:02d}:{second % 60:02d}"
    if profile.name == "hdfs":
        return "081109 {:06d} {} INFO dfs.Node{}:".format(
            (203518 + line_no) % 1000000, rng.randint(1, 60000), rng.randint(1, 8))
    return "2019-06-{:02d} {} SYS{} ETH{}".format(
        1 + line_no // 86400, clock, rng.randint(1, 5), rng.randint(0, 1))


# ---------------------------------------------------------------------------
# Labeled corpus
# ---------------------------------------------------------------------------

@dataclass
class LabeledCorpus:
    records: list[LogRecord]
    labels: dict[int, str]
    train_ids: list[int]
    test_ids: list[int]
    raw_lines: list[str]
    schema: HeaderSchema
    profile_name: str = ""

    @property
    def train_records(self) -> list[LogRecord]:
        wanted = set(self.train_ids)
        return [r for r in self.records if r.line_id in wanted]

    @property
    def test_records(self) -> list[LogRecord]:
        wanted = set(self.test_ids)
        return [r for r in self.records if r.line_id in wanted]


def synth_corpus(seed: int, n_train: int, n_test: int, n_anomalies: int,
                 profile: CorpusProfile = IIOT_PROFILE) -> LabeledCorpus:
    """Deterministic labeled corpus: all-normal train slice, mixed test slice."""
    if n_train < 1 or n_test < 0 or n_anomalies < 0:
        raise InvalidSpec("corpus sizes must be positive")
    if n_anomalies > n_test:
        raise InvalidSpec(f"{n_anomalies} anomalies cannot fit in {n_test} test lines")

    rng = random.Random(seed)
    raw_lines: list[str] = []
    labels: dict[int, str] = {}

    for i in range(n_train):
        line_id = i + 1
        raw_lines.append(f"{_header(rng, profile, i)} {_normal_content(rng, profile)}")
        labels[line_id] = NORMAL

    anomaly_slots = frozenset(rng.sample(range(n_test), n_anomalies))
    ordinal = 0
    for j in range(n_test):
        line_id = n_train + j + 1
        header = _header(rng, profile, n_train + j)
        if j in anomaly_slots:
            ordinal += 1
            raw_lines.append(f"{header} {_anomaly_content(rng, profile, ordinal)}")
            labels[line_id] = ANOMALY
        else:
            raw_lines.append(f"{header} {_normal_content(rng, profile)}")
            labels[line_id] = NORMAL

    schema = compile_schema(profile.format_template, profile.mask_rules)
    records, skipped = read_records(raw_lines, schema, on_error="raise")
    assert skipped == 0
    return LabeledCorpus(records=records, labels=labels,
                         train_ids=list(range(1, n_train + 1)),
                         test_ids=list(range(n_train + 1, n_train + n_test + 1)),
                         raw_lines=raw_lines, schema=schema,
                         profile_name=profile.name)


def write_corpus(corpus: LabeledCorpus, out_dir) -> dict[str, Path]:
    """Write corpus.log plus labels.csv/split.csv sidecars.

    train.log and test.log repeat the two slices for direct use with the
    train and detect commands.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"log": out_dir / "corpus.log", "labels": out_dir / "labels.csv",
             "split": out_dir / "split.csv", "train_log": out_dir / "train.log",
             "test_log": out_dir / "test.log"}
    paths["log"].write_text("\n".join(corpus.raw_lines) + "\n", encoding="utf-8")
    n_train = len(corpus.train_ids)
    paths["train_log"].write_text("\n".join(corpus.raw_lines[:n_train]) + "\n",
                                  encoding="utf-8")
    test_lines = corpus.raw_lines[n_train:]
    paths["test_log"].write_text(("\n".join(test_lines) + "\n") if test_lines else "",
                                 encoding="utf-8")
    label_rows = [f"{line_id},{corpus.labels[line_id]}"
                  for line_id in sorted(corpus.labels)]
    paths["labels"].write_text("line_id,label\n" + "\n".join(label_rows) + "\n",
                               encoding="utf-8")
    train = set(corpus.train_ids)
    split_rows = [f"{line_id},{'train' if line_id in train else 'test'}"
                  for line_id in sorted(corpus.labels)]
    paths["split"].write_text("line_id,part\n" + "\n".join(split_rows) + "\n",
                              encoding="utf-8")
    return paths


def load_corpus(log_path, labels_path, split_path, schema: HeaderSchema,
                profile_name: str = "") -> LabeledCorpus:
    """Rehydrate a corpus written by :func:`write_corpus`."""
    raw_lines = Path(log_path).read_text(encoding="utf-8").splitlines()
    records, _ = read_records(raw_lines, schema, on_error="raise")
    labels: dict[int, str] = {}
    for row in Path(labels_path).read_text(encoding="utf-8").splitlines()[1:]:
        line_id, label = row.split(",")
        labels[int(line_id)] = label
    train_ids: list[int] = []
    test_ids: list[int] = []
    for row in Path(split_path).read_text(encoding="utf-8").splitlines()[1:]:
        line_id, part = row.split(",")
        (train_ids if part == "train" else test_ids).append(int(line_id))
    for line_id in train_ids:
        if labels.get(line_id) != NORMAL:
            raise LabelMismatch(f"training line {line_id} is not normal")
    return LabeledCorpus(records=records, labels=labels, train_ids=train_ids,
                         test_ids=test_ids, raw_lines=raw_lines, schema=schema,
                         profile_name=profile_name)


# ---------------------------------------------------------------------------
# Metrics and the significance sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self) -> float | None:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else None

    @property
    def recall(self) -> float | None:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else None


def score_metrics(verdicts: list[Verdict], labels: dict[int, str]) -> Metrics:
    """Confusion counts with the anomaly label as the positive class."""
    if {v.line_id for v in verdicts} != set(labels):
        raise LabelMismatch("verdicts and labels cover different line ids")
    tp = fp = fn = tn = 0
    for v in verdicts:
        truth_anomaly = labels[v.line_id] == ANOMALY
        called_anomaly = v.label == ANOMALY
        if called_anomaly and truth_anomaly:
            tp += 1
        elif called_anomaly:
            fp += 1
        elif truth_anomaly:
            fn += 1
        else:
            tn += 1
    return Metrics(tp=tp, fp=fp, fn=fn, tn=tn)


@dataclass(frozen=True)
class SweepRow:
    configuration: str
    epsilon: float
    metrics: Metrics


DEFAULT_GRID = (0.27, 0.3, 0.4, 0.6, 0.83)


def significance_sweep(models: list[CalibrationModel], corpus: LabeledCorpus,
                       eps_grid=DEFAULT_GRID) -> list[SweepRow]:
    """Evaluate each parser alone and the ensemble at every epsilon.

    A parser finds a record normal iff its maximal p-value reaches epsilon,
    so per-record per-parser maxima are computed once and reused across the
    whole grid.
    """
    test = corpus.test_records
    max_p: dict[str, list[float]] = {m.parser_name: [] for m in models}
    cache: dict[tuple, dict[str, float]] = {}
    for rec in test:
        per_parser = cache.get(rec.tokens)
        if per_parser is None:
            per_parser = {m.parser_name: pvalues_for(m, rec).max_p() for m in models}
            cache[rec.tokens] = per_parser
        for name, value in per_parser.items():
            max_p[name].append(value)

    truth = [corpus.labels[rec.line_id] == ANOMALY for rec in test]
    configurations = [(m.parser_name, [m.parser_name]) for m in models]
    configurations.append(("ensemble", [m.parser_name for m in models]))

    rows = []
    for config_name, members in configurations:
        for eps in eps_grid:
            tp = fp = fn = tn = 0
            for idx, is_anomaly in enumerate(truth):
                alarmed = all(max_p[name][idx] < eps for name in members)
                if alarmed and is_anomaly:
                    tp += 1
                elif alarmed:
                    fp += 1
                elif is_anomaly:
                    fn += 1
                else:
                    tn += 1
            rows.append(SweepRow(configuration=config_name, epsilon=eps,
                                 metrics=Metrics(tp=tp, fp=fp, fn=fn, tn=tn)))
    return rows


def _fmt_ratio(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def render_sweep_csv(rows: list[SweepRow]) -> str:
    out = ["configuration,epsilon,tp,fp,fn,tn,precision,recall"]
    for r in rows:
        m = r.metrics
        out.append(f"{r.configuration},{r.epsilon},{m.tp},{m.fp},{m.fn},{m.tn},"
                   f"{_fmt_ratio(m.precision)},{_fmt_ratio(m.recall)}")
    return "\n".join(out) + "\n"


def render_sweep_table(rows: list[SweepRow]) -> str:
    headers = ["configuration", "epsilon", "tp", "fp", "fn", "tn",
               "precision", "recall"]
    cells = [headers]
    for r in rows:
        m = r.metrics
        cells.append([r.configuration, str(r.epsilon), str(m.tp), str(m.fp),
                      str(m.fn), str(m.tn), _fmt_ratio(m.precision) or "-",
                      _fmt_ratio(m.recall) or "-"])
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
             for row in cells]
    return "\n".join(lines) + "\n"

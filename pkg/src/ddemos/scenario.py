"""Wire a whole election into the simulator and collect its results."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

from ddemos.adversary import POLICIES, VC_BEHAVIOURS, EquivocatingVC, policy_schedule
from ddemos.auditor import DelegatedAudit
from ddemos.bb import BBNode, BBTranscript, GarbageBBNode, NoQuorum, SilentBBNode, majority_value
from ddemos.ea import ElectionBundle
from ddemos.netsim import ConformanceError, RunTranscript, SimConfig, Simulator
from ddemos.trustee import TrusteeNode
from ddemos.vc import VCNode
from ddemos.voter import VoterIntent, VoterNode, VoterSession, compute_t_wait

BB_BEHAVIOURS = {"garbage": GarbageBBNode, "silent": SilentBBNode}


@dataclass
class Scenario:
    """Voter intents plus the adversary and network configuration of one run.

    ``corrupt_vc`` / ``corrupt_bb`` are 1-based node indices; ``None`` means
    "the last ``f`` nodes" whenever the policy corrupts that kind of node.
    """

    intents: list = field(default_factory=list)
    policy: str = "honest"
    corrupt_vc: list | None = None
    corrupt_bb: list | None = None
    delta: int = 5
    drift: int = 2
    t_comp: int = 1
    mode: str = "liveness"
    schedule: str = "random"
    drop_rate: float = 0.0
    dup_rate: float = 0.0
    barrier: int | None = None
    patience: int | None = None
    t_end: int | None = None
    voting_only: bool = False
    max_ticks: int = 2_000_000
    log_events: bool = True

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise ValueError(f"unknown adversary policy {self.policy!r}; choose from {sorted(POLICIES)}")
        self.intents = [i if isinstance(i, VoterIntent) else VoterIntent.from_dict(i) for i in self.intents]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["intents"] = [i.to_dict() for i in self.intents]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        """Build from a dict; ``counts`` (with optional ``part_seq``, ``start``,
        ``spacing``) is shorthand for scripted intents."""
        d = dict(d)
        if "counts" in d:
            if d.get("intents"):
                raise ValueError("give either intents or counts, not both")
            d["intents"] = intents_from_counts(d.pop("counts"), d.pop("part_seq", None),
                                               d.pop("start", 0), d.pop("spacing", 0))
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown scenario fields: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str) -> "Scenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def corrupted(self, params) -> tuple[list, list]:
        vc_b, bb_b, _ = POLICIES[self.policy]
        vcs = self.corrupt_vc
        if vcs is None:
            vcs = list(range(params.n_v - params.f_v + 1, params.n_v + 1)) if vc_b else []
        bbs = self.corrupt_bb
        if bbs is None:
            bbs = list(range(params.n_b - params.f_b + 1, params.n_b + 1)) if bb_b else []
        return list(vcs), list(bbs)


def intents_from_counts(counts, part_seq=None, start: int = 0, spacing: int = 0) -> list[VoterIntent]:
    """Scripted intents: ``counts[i]`` voters for option ``i``, serials 1, 2, ... in order."""
    out = []
    serial = 1
    for opt, k in enumerate(counts):
        for _ in range(k):
            part = "A" if part_seq is None else part_seq[(serial - 1) % len(part_seq)]
            out.append(VoterIntent(serial, part, opt, start + spacing * (serial - 1)))
            serial += 1
    return out


@dataclass
class ElectionRun:
    params: object
    scenario: Scenario
    seed: int
    sessions: list  # VoterSession, one per intent
    intents: list
    vcs: dict
    bbs: dict
    trustees: dict
    transcript: RunTranscript
    corrupt_vc: list
    corrupt_bb: list

    @property
    def honest_vcs(self) -> list:
        return [v for v in self.vcs.values() if v.honest]

    @property
    def vote_sets(self) -> dict:
        return {v.name: v.vote_set for v in self.honest_vcs}

    @property
    def receipts(self) -> dict:
        """``(serial, code) -> receipt`` for every voter that accepted a receipt."""
        return {(s.ballot.serial, s.code): s.receipt for s in self.sessions if s.outcome == "receipt"}

    def bb_transcripts(self) -> dict:
        return {b.name: b.transcript() for b in self.bbs.values()}

    def published(self) -> BBTranscript:
        """Majority view over the BB transcripts (raises :class:`NoQuorum`)."""
        ts = list(self.bb_transcripts().values())
        return majority_value([(t.digest(), t) for t in ts], self.params.f_b)

    @property
    def tally(self):
        try:
            return self.published().tally
        except NoQuorum:
            return None

    def delegated(self) -> list[DelegatedAudit]:
        return [DelegatedAudit.from_ballot(s.ballot, s.part, s.code if s.outcome == "receipt" else None)
                for s in self.sessions]

    def intended_tally(self, vote_set) -> tuple:
        """What the tally should be if every vote-set entry counts with its printed option."""
        counts = [0] * self.params.m
        by_code = {}
        for s in self.sessions:
            for part, lines in s.ballot.parts.items():
                for j, ln in enumerate(lines):
                    by_code[(s.ballot.serial, ln.code)] = j
        for entry in vote_set:
            j = by_code.get(tuple(entry))
            if j is not None:
                counts[j] += 1
        return tuple(counts)

    def save(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        self.transcript.extra.update({
            "seed": self.seed,
            "scenario": self.scenario.to_dict(),
            "corrupt_vc": self.corrupt_vc,
            "corrupt_bb": self.corrupt_bb,
            "vote_sets": {k: None if v is None else [[s, c.hex()] for s, c in v]
                          for k, v in self.vote_sets.items()},
        })
        self.transcript.save(os.path.join(out_dir, "run_transcript.json"))
        for name, t in self.bb_transcripts().items():
            t.save(os.path.join(out_dir, f"bb_transcript_{name[2:]}.json"))
        with open(os.path.join(out_dir, "voters.json"), "w") as fh:
            json.dump([{"serial": s.ballot.serial, "part": s.part, "option": s.option, "outcome": s.outcome,
                        "receipt": None if s.receipt is None else s.receipt.hex(),
                        "attempts": s.attempts, "latency": s.latency} for s in self.sessions],
                      fh, indent=1, sort_keys=True)
        with open(os.path.join(out_dir, "delegated.json"), "w") as fh:
            json.dump([d.to_dict() for d in self.delegated()], fh, indent=1, sort_keys=True)


def build_config(scenario: Scenario, seed: int) -> SimConfig:
    return SimConfig(seed=seed, delta=scenario.delta, drift=scenario.drift, t_comp=scenario.t_comp,
                     mode=scenario.mode, schedule=policy_schedule(scenario.policy, scenario.schedule, seed),
                     drop_rate=scenario.drop_rate, dup_rate=scenario.dup_rate, barrier=scenario.barrier,
                     max_ticks=scenario.max_ticks, log_events=scenario.log_events)


def run_election(bundle: ElectionBundle, scenario: Scenario, seed: int = 0, unsound: bool = False) -> ElectionRun:
    p = bundle.params
    vc_bad, bb_bad = scenario.corrupted(p)
    if not unsound:
        if len(vc_bad) > p.f_v:
            raise ConformanceError(f"{len(vc_bad)} corrupted VC nodes exceed f_v={p.f_v}")
        if len(bb_bad) > p.f_b:
            raise ConformanceError(f"{len(bb_bad)} corrupted BB nodes exceed f_b={p.f_b}")
    cfg = build_config(scenario, seed)
    sim = Simulator(cfg)
    barrier = cfg.end_barrier
    t_end = p.t_end if scenario.t_end is None else scenario.t_end
    vc_kind, bb_kind, _ = POLICIES[scenario.policy]
    knowledge = {b.serial: b for b in bundle.ballots}

    vcs = {}
    for init in bundle.vc_inits:
        kw = {"end_phase": not scenario.voting_only}
        if init.index in vc_bad and vc_kind:
            cls = VC_BEHAVIOURS[vc_kind]
            if cls is EquivocatingVC:
                kw["knowledge"] = knowledge
            node = cls(init, barrier, t_end, seed, **kw)
        else:
            node = VCNode(init, barrier, t_end, seed, **kw)
        vcs[node.name] = sim.add_node(node)

    bbs, trustees = {}, {}
    if not scenario.voting_only:
        for i in range(1, p.n_b + 1):
            if i in bb_bad and bb_kind:
                node = BB_BEHAVIOURS[bb_kind](i, bundle.bb_init, seed)
            else:
                node = BBNode(i, bundle.bb_init)
            bbs[node.name] = sim.add_node(node)
        for tinit in bundle.trustee_inits:
            node = TrusteeNode(tinit, start_at=t_end + 2 * barrier)
            trustees[node.name] = sim.add_node(node)

    patience = scenario.patience or compute_t_wait(p.n_v, cfg.t_comp, cfg.drift, cfg.delta)
    sessions = []
    used_names: dict = {}
    for intent in scenario.intents:
        ballot = bundle.ballots[intent.serial - 1]
        session = VoterSession(ballot, intent.part, intent.option, patience)
        copy = used_names.get(ballot.serial, 0)
        used_names[ballot.serial] = copy + 1
        sim.add_node(VoterNode(session, list(vcs), intent.start, seed, copy))
        sessions.append(session)

    sim.run()
    return ElectionRun(p, scenario, seed, sessions, list(scenario.intents), vcs, bbs, trustees,
                       sim.transcript(), vc_bad, bb_bad)


__all__ = ["Scenario", "ElectionRun", "run_election", "intents_from_counts", "build_config", "BB_BEHAVIOURS"]

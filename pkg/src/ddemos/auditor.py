"""Auditor: verification checks (a)-(g) over a published BB transcript.

(a) within each ballot no two vote codes are the same (and every code
    decrypts under the published msk),
(b) no part has more than one submitted code,
(c) no ballot has both parts used,
(d) every opening of an unused part is valid and the tally opening matches
    the recomputed ``E_sum``,
(e) every completed proof of a used part verifies under the coin challenge,
(f) vote codes reported by voters appear in the vote set, each with a
    valid UCERT,
(g) unused parts delegated by voters match their printed ballots, and no
    serial number was printed twice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ddemos.bb import BBTranscript
from ddemos.crypto.commitments import CommitmentError, is_unit_vector, open_and_decode, fold
from ddemos.crypto.proofs import IncompleteProof, verify_proof
from ddemos.crypto.symmetric import dec_vote_code
from ddemos.ea import PARTS, Ballot, BallotLine, IncompleteAudit, audit_setup
from ddemos.messages import ucert_ok
from ddemos.trustee import challenge_for, classify_ballots, derive_coins

CHECKS = ("a", "b", "c", "d", "e", "f", "g")


@dataclass(frozen=True)
class DelegatedAudit:
    """What a voter hands to an auditor: the cast code and the unused part."""

    serial: int
    cast_code: bytes | None
    unused_part: str
    printed: tuple  # BallotLine, in option order

    @classmethod
    def from_ballot(cls, ballot: Ballot, used_part: str | None, cast_code: bytes | None) -> "DelegatedAudit":
        unused = "B" if used_part == "A" else "A"
        return cls(ballot.serial, cast_code, unused, tuple(ballot.parts[unused]))

    def to_dict(self) -> dict:
        return {"serial": self.serial, "cast_code": None if self.cast_code is None else self.cast_code.hex(),
                "unused_part": self.unused_part,
                "printed": [[ln.code.hex(), ln.option, ln.receipt.hex()] for ln in self.printed]}

    @classmethod
    def from_dict(cls, d) -> "DelegatedAudit":
        return cls(int(d["serial"]), None if d["cast_code"] is None else bytes.fromhex(d["cast_code"]),
                   d["unused_part"], tuple(BallotLine(bytes.fromhex(c), o, bytes.fromhex(r))
                                           for c, o, r in d["printed"]))


@dataclass
class AuditReport:
    status: str = "pass"  # pass | fail | incomplete
    entries: list = field(default_factory=list)  # {check, serial, detail}
    checked: dict = field(default_factory=dict)

    def add(self, check: str, serial, detail: str) -> None:
        self.entries.append({"check": check, "serial": serial, "detail": detail})
        if self.status == "pass":
            self.status = "fail"

    def incomplete(self, detail: str) -> None:
        self.status = "incomplete"
        self.entries.append({"check": "transcript", "serial": None, "detail": detail})

    def violations(self, check: str | None = None) -> list:
        return [e for e in self.entries if check is None or e["check"] == check]

    @property
    def ok(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {"status": self.status, "entries": self.entries, "checked": self.checked}

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)


def voter_check(t: BBTranscript, serial: int, code: bytes) -> bool:
    """The voter's own check that her cast code made it into the vote set."""
    return t.vote_set is not None and (serial, code) in set(t.vote_set)


def audit(t: BBTranscript, delegated=()) -> AuditReport:
    rep = AuditReport()
    if t.phase != "tallied" or t.tally_opening is None:
        rep.incomplete(f"transcript is at phase {t.phase!r}, not tallied")
        return rep
    p = t.params
    gp = p.group_params
    q = gp.order
    lines = t.bb_init.lines
    codes = t.codes

    # (a)
    for serial in sorted(codes):
        seen: dict = {}
        for part in PARTS:
            for pos, code in enumerate(codes[serial][part]):
                if code is None:
                    rep.add("a", serial, f"part {part} position {pos}: vote code does not decrypt")
                    continue
                if t.msk is not None and dec_vote_code(lines[serial][part][pos].enc_code, t.msk) != code:
                    rep.add("a", serial, f"part {part} position {pos}: published code differs from decryption")
                if code in seen:
                    rep.add("a", serial, f"vote code repeated at {seen[code]} and {(part, pos)}")
                seen.setdefault(code, (part, pos))
    rep.checked["a"] = len(codes)

    status = classify_ballots(t.vote_set, codes)
    coins = derive_coins(status)
    if t.coins is not None and tuple(t.coins) != coins:
        rep.add("e", None, "published coins differ from the vote set")

    # (b), (c)
    for serial, st in status.items():
        if st.kind == "invalid":
            rep.add("c" if st.reason == "both parts used" else "b", serial, st.reason)
    rep.checked["b"] = rep.checked["c"] = len(status)

    # (d)
    n_open = 0
    for serial, st in sorted(status.items()):
        if st.kind == "invalid":
            continue
        for part in PARTS:
            if st.kind == "voted" and part == st.part:
                continue
            ops = t.openings.get((serial, part))
            if ops is None or len(ops) != p.m:
                rep.add("d", serial, f"part {part}: openings missing")
                continue
            decoded = []
            for pos, o in enumerate(ops):
                n_open += 1
                try:
                    decoded.append(open_and_decode(lines[serial][part][pos].commitment, o, gp))
                except CommitmentError as exc:
                    rep.add("d", serial, f"part {part} position {pos}: {exc}")
                    decoded.append(None)
            if all(d is not None for d in decoded):
                if not all(is_unit_vector(d) for d in decoded) or \
                        sorted(d.index(1) for d in decoded) != list(range(p.m)):
                    rep.add("d", serial, f"part {part}: openings are not one unit vector per option")
    voted = [lines[s][st.part][st.pos].commitment for s, st in sorted(status.items()) if st.kind == "voted"]
    e_sum = fold(voted, p.m, gp)
    try:
        tally = open_and_decode(e_sum, t.tally_opening, gp)
        if tuple(tally) != tuple(t.tally):
            rep.add("d", None, f"tally opening decodes to {tally}, published {tuple(t.tally)}")
    except CommitmentError as exc:
        rep.add("d", None, f"tally opening does not match E_sum: {exc}")
    rep.checked["d"] = n_open + 1

    # (e)
    n_proofs = 0
    for serial, st in sorted(status.items()):
        if st.kind != "voted":
            continue
        prs = t.proofs.get((serial, st.part))
        if prs is None or len(prs) != p.m:
            rep.add("e", serial, f"part {st.part}: completed proofs missing")
            continue
        for pos, proof in enumerate(prs):
            n_proofs += 1
            c = lines[serial][st.part][pos].commitment
            first = lines[serial][st.part][pos].proof
            ch = challenge_for(coins, serial, st.part, pos, q)
            try:
                ok = (proof.announcements == first.announcements
                      and proof.sum_announcement == first.sum_announcement
                      and verify_proof(c, proof, gp, challenge=ch))
            except IncompleteProof:
                ok = False
            if not ok:
                rep.add("e", serial, f"part {st.part} position {pos}: proof does not verify")
    rep.checked["e"] = n_proofs

    # (f)
    entries = set(t.vote_set)
    thr = p.n_v - p.f_v
    if len(t.ucerts) != len(t.vote_set):
        rep.add("f", None, "vote set is not accompanied by one UCERT per entry")
    else:
        for (serial, code), u in zip(t.vote_set, t.ucerts):
            if not ucert_ok(u, serial, t.bb_init.public.vc_publics, thr) or u.code != code:
                rep.add("f", serial, "vote-set entry without a valid UCERT")
    for d in delegated:
        if d.cast_code is not None and (d.serial, d.cast_code) not in entries:
            rep.add("f", d.serial, "cast vote code missing from the vote set")
    rep.checked["f"] = len(t.vote_set) + len(delegated)

    # (g)
    by_serial: dict = {}
    for d in delegated:
        by_serial.setdefault(d.serial, []).append(d)
        if d.serial not in codes:
            rep.add("g", d.serial, "serial number not on the BB")
            continue
        st = status[d.serial]
        if st.kind == "voted" and st.part == d.unused_part:
            rep.add("g", d.serial, f"part {d.unused_part} was reported unused but was voted")
            continue
        try:
            problems = audit_setup(d.serial, d.unused_part, d.printed, codes[d.serial][d.unused_part],
                                   t.openings.get((d.serial, d.unused_part), (None,) * len(d.printed)),
                                   p.options)
        except IncompleteAudit as exc:
            rep.add("g", d.serial, str(exc))
            continue
        for msg in problems:
            rep.add("g", d.serial, msg)
    for serial, ds in by_serial.items():
        if len(ds) > 1:
            rep.add("g", serial, f"clash: {len(ds)} printed ballots share serial {serial}")
    rep.checked["g"] = len(delegated)
    return rep


__all__ = ["CHECKS", "DelegatedAudit", "AuditReport", "audit", "voter_check"]

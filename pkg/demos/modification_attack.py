"""A cheating EA swaps two options on one part of ballot 2.

If the voter casts with the tampered part the swap goes unnoticed and the
tally shifts.  If the voter casts with the other part, the tampered part is
opened for audit and the auditor flags the ballot.
"""

from ddemos.auditor import audit
from ddemos.ea import ElectionParams, setup
from ddemos.scenario import Scenario, run_election
from ddemos.voter import VoterIntent


def trial(voted_part):
    bundle = setup(ElectionParams(n=4, m=2, options=("yes", "no"), group="test", seed=3, t_end=300),
                   {"kind": "modify", "serials": [2], "part": "A", "swap": [0, 1]})
    intents = [VoterIntent(s, voted_part, 0) for s in range(1, 5)]
    run = run_election(bundle, Scenario(intents=intents), seed=3)
    rep = audit(run.published(), run.delegated())
    print(f"voters use part {voted_part}: tally {run.tally}, audit {rep.status}")
    for e in rep.entries:
        print("   ", e)


if __name__ == "__main__":
    trial("A")
    trial("B")

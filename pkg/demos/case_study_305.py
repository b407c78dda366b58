"""Eight voters, three options: three vote alice, five vote carol.

Walks one election through setup, voting, the end phase, the trustee
opening and the public audit, printing what each party sees.
"""

from ddemos.auditor import audit
from ddemos.ea import ElectionParams, setup
from ddemos.scenario import Scenario, intents_from_counts, run_election


def main():
    params = ElectionParams(n=8, m=3, options=("alice", "bob", "carol"), group="test", seed=7, t_end=300)
    bundle = setup(params)
    print(f"EA produced {len(bundle.ballots)} ballots for {params.n_v} VCs, {params.n_b} BBs, {params.n_t} trustees")

    run = run_election(bundle, Scenario(intents=intents_from_counts([3, 0, 5], "AB")), seed=7)
    for s in run.sessions:
        print(f"  ballot {s.ballot.serial}: part {s.part}, option {params.options[s.option]:5s} "
              f"-> receipt {s.receipt.hex()} (printed {s.expected_receipt.hex()}) via {s.attempts[0][0]}")

    t = run.published()
    print("vote set size:", len(t.vote_set))
    print("tally:", "(" + ",".join(map(str, t.tally)) + ")")
    rep = audit(t, run.delegated())
    print("audit:", rep.status, f"({len(rep.checked)} checks)")


if __name__ == "__main__":
    main()

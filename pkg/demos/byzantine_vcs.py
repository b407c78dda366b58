"""Run the same small election under every adversary policy.

With one faulty VC and one faulty BB the outcome never changes; only the
number of retries and the amount of traffic do.
"""

from ddemos.ea import ElectionParams, setup
from ddemos.adversary import POLICIES
from ddemos.scenario import Scenario, intents_from_counts, run_election


def main():
    bundle = setup(ElectionParams(n=6, m=2, group="test", seed=1, t_end=300))
    intents = intents_from_counts([4, 2], "AB")
    print(f"{'policy':18s} {'tally':8s} receipts retries messages")
    for policy in sorted(POLICIES):
        run = run_election(bundle, Scenario(intents=intents, policy=policy, log_events=False), seed=2)
        retries = sum(s.failed_attempts for s in run.sessions)
        print(f"{policy:18s} {str(run.tally):8s} {len(run.receipts):8d} {retries:7d} "
              f"{run.transcript.metrics['delivered']:8d}")


if __name__ == "__main__":
    main()

"""Easy task first, then a hard one, then a medium one.

Runs the four strategies on the SIMPLE_HARD sequence and prints accuracy
right after each task and at the end of the sequence.  The adaptive
selector leaves most of the network to the spirals task, a fixed 50% rate
does not, and plain fine-tuning forgets.  Takes about half a minute.
"""
from acll import Strategy, make_task_specs, preset_tasks, run_sequence

specs = make_task_specs(preset_tasks("SIMPLE_HARD", n_per_split=2000, seed=0), seed=0)
strategies = [Strategy.acll(0.02), Strategy.fixed(0.5), Strategy("finetune"), Strategy("independent")]

print(f"{'strategy':<14} {'task':<10} {'theta':>6} {'size':>6} {'after':>7} {'end':>7}")
for strategy in strategies:
    report = run_sequence(specs, strategy, seed=0)
    for t in report.tasks:
        print(f"{report.strategy:<14} {t.name:<10} {t.theta[0]:>6.3f} {t.size:>6.3f} "
              f"{t.acc_post_task:>7.4f} {t.acc_end_of_sequence:>7.4f}")
    print(f"{'':<14} {'average':<10} {'':>6} {'':>6} {'':>7} {report.average_end_accuracy:>7.4f}")
    print(f"{'':<14} owned fraction after each task: "
          + ", ".join(f"{f:.3f}" for f in report.owned_fraction) + "\n")

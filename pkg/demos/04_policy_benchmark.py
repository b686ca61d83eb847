"""Benchmark comparison of EDF / LLSP / LLLP on the capacity scenario.
==========================================================================

400 chargers, iid uniform capacity between 40 and 160 vehicles per stage,
a fixed number of arrivals per stage with uniform stays and requests.
Charging within capacity is free, so all realized cost is non-completion
penalty.  The same seeds drive every policy (and every arrival rate), so the
differences below are paired, not luck.  A full-resolution run is the
`chargesched simulate` CLI; this demo uses a lighter grid so it finishes in
about a minute.
"""

from chargesched import figure_experiment

T, N_TRAJ, SEED = 200, 1_500, 42
RATES = (20, 25, 30)

for penalty in ("linear", "quadratic"):
    table = figure_experiment(penalty, RATES, stages=T, n_traj=N_TRAJ, seed=SEED)
    print(f"\n{penalty} penalty  (T={T}, {N_TRAJ} paired trajectories/cell)")
    print(f"  {'rate':>4}  {'EDF':>10}  {'LLSP':>10}  {'LLLP':>10}  "
          f"{'LLSP->LLLP':>10}")
    for rate in RATES:
        edf = table.mean("edf", rate)
        llsp = table.mean("llsp", rate)
        lllp = table.mean("lllp", rate)
        red = f"{(llsp - lllp) / llsp:7.1%}" if llsp > 0 else "      -"
        print(f"  {rate:>4}  {edf:>10.4f}  {llsp:>10.4f}  {lllp:>10.4f}  {red:>10}")
    csv_path = f"benchmark_{penalty}.csv"
    table.to_csv(csv_path)
    print(f"  full cell statistics written to {csv_path}")

print("""
Reading the table: LLSP already beats EDF badly (deadline order ignores how
much work is left), and LLLP's tie-break toward longer remaining work buys a
further, consistent reduction that widens under the quadratic penalty, where
spreading unfinished work across many small shortfalls is rewarded.""")

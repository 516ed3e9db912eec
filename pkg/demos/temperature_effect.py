"""How cold weather changes the station network.

A cold battery accepts charge slowly, so an 80-minute stop restores less
range at -10 C than at 30 C. Vehicles then need more charging stops, which
means more stations have to be opened. This script solves one instance at
three temperatures and prints what the planner decides.

    python demos/temperature_effect.py
"""

from elrp import check_solution, default_calibration
from elrp.bench import suite_instance
from elrp.sigalns import SigalnsParams, sigalns

CHARGE_MINUTES = 80.0


def main():
    inst = suite_instance(45)
    print(f"instance: {len(inst.customers)} customers, {len(inst.stations)} candidate stations, "
          f"{len(inst.fleet)} vehicles, full range {inst.d_max:.0f} km\n")

    print("recharge map soc_out = mu1 * soc_in + mu2 after an 80-minute stop:")
    for temp in (-10.0, 10.0, 30.0):
        ch = default_calibration(temp, CHARGE_MINUTES)
        print(f"  {temp:+5.0f} C: mu1 = {ch.mu1:.3f}, mu2 = {ch.mu2:5.1f}  "
              f"(a battery arriving at 20% leaves at {ch.soc_after(20.0):.0f}%)")
    print()

    print(f"{'temp':>6} {'stations':>9} {'station cost':>13} {'driving':>9} {'total':>9}")
    for temp in (-10.0, 10.0, 30.0):
        ch = default_calibration(temp, CHARGE_MINUTES)
        sol = sigalns(inst, ch, SigalnsParams(seed=0))
        assert check_solution(inst, ch, sol).clean
        obj = sol.objective
        print(f"{temp:+5.0f}C {len(sol.opened):>9} {obj.station_cost:>13.0f} "
              f"{obj.routing_cost:>9.0f} {obj.total:>9.0f}")

    print("\nWarmer weather opens fewer stations and lowers the total cost.")


if __name__ == "__main__":
    main()

"""Measurement strength for the bundled cavity-QED parameter set.

Prints the declared reading next to the all-angular and all-ordinary
readings of the convention-ambiguous rates, plus the simulator rates the
declared reading implies.
"""

from photon_feedback import cavity_qed
from photon_feedback.config import load_scenario


def main():
    qed = load_scenario("table1").qed
    reports = cavity_qed.feasibility_both(qed)
    print(f"{'reading':>9} {'M [1/s]':>11} {'M/kappa':>9} {'sqrt(N)g0^2/(Gamma kappa)':>27}")
    for name, rep in reports.items():
        print(f"{name:>9} {rep.M:11.4g} {rep.M_over_kappa:9.4g} {rep.strong_coupling:27.4g}")
    print(f"Omega = {reports['declared'].Omega:.4g} /s, probe omega_b = {reports['declared'].omega_b:.4g} /s")
    print(f"linewidth from L and finesse: {cavity_qed.cavity_linewidth(qed.L, qed.finesse):.4g} Hz")
    sim = cavity_qed.to_sim_params(qed, n_star=2)
    print(f"simulator rates (units of M): kappa = {sim.kappa:.4g}, eta = {sim.eta:g}")


if __name__ == "__main__":
    main()

"""Adaptive BDDC on the multi-sinker problem for growing viscosity contrast.

Run with ``python3 demos/sinkers.py``.
"""
from vembddc.bench.config import CaseConfig
from vembddc.bench.suite import format_row, run_suite


def main():
    base = CaseConfig(n=6, problem="sinker", sinkers=4, coarse="adaptive", nu_tol=5.0,
                      edge_scaling="deluxe", errors=False)
    cfgs = [base.with_(name=f"dr{dr:g}", dr=dr) for dr in (1.0, 1e2, 1e4, 1e6)]
    rows, _ = run_suite(cfgs)
    for r in rows:
        print(format_row(r))


if __name__ == "__main__":
    main()

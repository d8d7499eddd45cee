"""Residual against grid spacing for a few generated solutions.

Each row runs the refinement check at one spacing: the residual on the grid,
the residual of the refined grid at the same nodes, and their ratio.
Second-order stencils should give ratios near 4.
"""
import argparse
from dataclasses import dataclass, field

from loopdress.fd import Grid
from loopdress.kdv import KdVElement, KdVState, pole_mask
from loopdress.kwgd import KWState, kw_flow_residual, kw_simple
from loopdress.solitons import breather, nls_soliton
from loopdress.verify import pde_residual


@dataclass
class StudyConfig:
    spacings: list = field(default_factory=lambda: [0.08, 0.04, 0.02])
    kdv_mask_radius: float = 0.5


def cases(cfg):
    csch = KdVState().apply(KdVElement(1.5, 1.0))
    kw = KWState(3).apply(kw_simple([1.0, 0.5 + 0.2j, -0.3], 0.9 + 0.2j))
    return {
        "nls soliton": lambda h: pde_residual(lambda X, T: nls_soliton(1.0, 0.5, X, T), "nls",
                                              Grid.uniform(-10, 10, h, -2, 2, h)),
        "breather": lambda h: pde_residual(breather(0.6), "sine-gordon", Grid.uniform(-10, 10, h, -3, 3, h)),
        "kdv csch, masked": lambda h: pde_residual(
            csch.q, "kdv", Grid.uniform(-8, 8, h, -0.5, 0.5, h / 2), check_width=False,
            mask_fn=lambda X, T: pole_mask(csch.q(X, T), X, radius=cfg.kdv_mask_radius)),
        "kw n=3": lambda h: pde_residual(
            lambda X, T: kw.evaluate(X, T).q,
            lambda q, g: kw_flow_residual(q, g.hx, g.ht, 3, accuracy=2, trim=False),
            Grid.uniform(-3, 3, h, -0.1, 0.1, h / 2), margin=(2, 12), check_width=False, name="kw"),
    }


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--spacings", type=float, nargs="+")
    args = p.parse_args()
    cfg = StudyConfig(**({"spacings": args.spacings} if args.spacings else {}))
    for name, run in cases(cfg).items():
        for h in cfg.spacings:
            r = run(h)
            print(f"{name:<18s} h={h:<6g} r(h)={r.residual_max:.3e}  r(h/2)={r.params['fine_residual_max']:.3e}"
                  f"  ratio {r.params['ratio']:.2f}  {'pass' if r.passed else 'FAIL'}")


if __name__ == "__main__":
    main()

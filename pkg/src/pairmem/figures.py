"""CSV emitters reproducing the figure data sets at desk scale."""

from __future__ import annotations

import io

from . import analysis as an
from .errors import ScenarioError
from .scenario import RunBundle, build_profile

FIGURES = ("fig1b", "fig2", "fig4a", "fig4b", "fig4c")


def _histogram_csv(hist: an.CorrelationHistogram) -> str:
    buf = io.StringIO()
    buf.write("bin_center_s,counts\n")
    for c, n in zip(hist.bin_centers, hist.counts):
        buf.write(f"{float(c)!r},{int(n)}\n")
    return buf.getvalue()


def emit_figure_data(bundle, figure: str) -> dict[str, str]:
    """CSV documents for one figure.

    ``bundle`` is a RunBundle for fig1b/fig2/fig4a and a list of
    RunBundles (one per sweep point) for fig4b/fig4c.
    """
    if figure not in FIGURES:
        raise ScenarioError(f"unknown figure {figure!r}")

    if figure in ("fig1b", "fig4a"):
        if not isinstance(bundle, RunBundle):
            raise ScenarioError(f"{figure} needs a single run bundle")
        return {f"{figure}.csv": _histogram_csv(bundle.histogram)}

    if figure == "fig2":
        if not isinstance(bundle, RunBundle):
            raise ScenarioError("fig2 needs a single run bundle")
        profile = build_profile(bundle.scenario)
        if profile is None:
            raise ScenarioError("fig2 needs a scenario with the AFC enabled")
        buf = io.StringIO()
        buf.write("freq_hz,optical_depth\n")
        for f, od in zip(profile.sample_freqs, profile.sample_od):
            buf.write(f"{float(f)!r},{float(od)!r}\n")
        return {"fig2.csv": buf.getvalue()}

    if not isinstance(bundle, (list, tuple)) or not bundle:
        raise ScenarioError(
            f"{figure} needs a sweep bundle set; run the scenario's sweep block")
    bundles = list(bundle)

    buf = io.StringIO()
    if figure == "fig4b":
        buf.write("afc_modes,n_eff,n_eff_err\n")
        for b in bundles:
            if b.scenario.afc_plan is None:
                raise ScenarioError("fig4b sweep point has no AFC")
            buf.write(f"{b.scenario.afc_plan.mode_count},"
                      f"{float(b.report.n_effective)!r},"
                      f"{float(b.report.n_effective_err)!r}\n")
        return {"fig4b.csv": buf.getvalue()}

    # fig4c: classical limit column is constant across pump powers
    n_limit = bundles[0].scenario.analysis.classical_mode_count
    if n_limit is None:
        n_limit = max(1, round(bundles[0].report.n_effective))
    climit = an.classical_limit(n_limit)
    buf.write("pump_mw,g2,g2_err,classical_limit\n")
    for b in bundles:
        buf.write(f"{float(b.scenario.pump_mw)!r},{float(b.report.g2)!r},"
                  f"{float(b.report.g2_err)!r},{float(climit)!r}\n")
    return {"fig4c.csv": buf.getvalue()}

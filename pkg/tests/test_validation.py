import numpy as np
import pytest

from thzsim.hbs.validation import (
    AgreementRow,
    free_space_suite,
    fresnel_oracle,
    random_silhouettes,
    summarize_agreement,
)


def test_fresnel_oracle_limits():
    assert abs(fresnel_oracle(0.0)) == pytest.approx(0.5, abs=1e-30)
    assert abs(fresnel_oracle(-200.0)) == pytest.approx(1.0, abs=0.01)


def test_regions():
    assert AgreementRow("box", -1.5, 0, 0, False).region == "lit"
    assert AgreementRow("box", -1.0, 0, 0, False).region == "transition"
    assert AgreementRow("box", 1.0, 0, 0, False).region == "transition"
    assert AgreementRow("box", 1.5, 0, 0, False).region == "shadow"


def test_summary_applies_tolerances():
    rows = [AgreementRow("box", -3, -0.5, 0.0, False), AgreementRow("box", 0.0, -7.0, -5.0, True)]
    s = summarize_agreement(rows)
    assert s["lit"]["pass"] and not s["transition"]["pass"]
    assert s["transition"]["fallback_fraction"] == 1.0 and s["shadow"]["pass"] is None


def test_silhouettes_are_reproducible_and_mixed():
    a = random_silhouettes(6, 3)
    b = random_silhouettes(6, 3)
    assert [k for k, _ in a] == ["walker", "ellipse", "box"] * 2
    assert all(np.array_equal(x.occupancy, y.occupancy) for (_, x), (_, y) in zip(a, b))


def test_free_space_suite():
    r = free_space_suite()
    assert r["pass"] and r["far_screen_nu_min"] < -100

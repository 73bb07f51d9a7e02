"""Acceptance criteria, one test each, at the stated tolerances.

Each test prints one PASS/FAIL line with the measured quantities.
"""


from lightray import checks


def _run(capsys, check, **kw):
    res = check(**kw)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()
    return res


def test_chord_lengths(capsys):
    _run(capsys, checks.chord_check)


def test_annihilation_by_potential_derivatives(capsys):
    _run(capsys, checks.annihilation_check)


def test_fourier_slice_identity(capsys):
    _run(capsys, checks.slice_check)


def test_scalar_round_trip(capsys):
    _run(capsys, checks.scalar_roundtrip_check)


def test_gauge_recovery(capsys):
    _run(capsys, checks.gauge_recovery_check)


def test_geometric_optics_residuals(capsys):
    _run(capsys, checks.go_residual_check)


def test_mollifier_estimates(capsys):
    _run(capsys, checks.mollifier_check)


def test_integral_identity(capsys):
    _run(capsys, checks.identity_check)


def test_dn_gauge_invariance(capsys):
    _run(capsys, checks.dn_gauge_check)


def test_asymptotic_reduction(capsys):
    _run(capsys, checks.reduction_check)


def test_support_localization(capsys):
    _run(capsys, checks.localization_check)

from hypernum import verify


def test_levels_are_even():
    assert verify.refinement_levels((24, 24, 48)) == [(12, 12, 24), (16, 16, 32), (24, 24, 48)]
    assert all(n % 2 == 0 for lvl in verify.refinement_levels((18, 18, 36)) for n in lvl)


def test_strictly_decreasing():
    assert verify.strictly_decreasing([3, 2, 1])
    assert not verify.strictly_decreasing([3, 3, 1])


def test_too_coarse_grid_becomes_failed_record():
    cfg = verify.VerifyConfig(refinement=(8, 8, 16))
    (rec,) = verify.run_verification(cfg, only=["cauchy_formula"])
    assert rec["pass"] is False and rec["measured"] is None and "distance" in rec["details"]["error"]


def test_records_are_plain_json():
    (rec,) = verify.run_verification(verify.VerifyConfig(), only=["quaternion_algebra"])
    assert rec["pass"] is True and rec["details"]["table_exact"] is True

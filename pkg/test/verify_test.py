import driftsquint.verify as verify


def test_checker():
    check = verify.Checker("demo")
    check.at_most("regret", [0.5, 1.0], 1.0)
    check.close("routes", [0.1, 0.2], [0.1, 0.2 + 1e-12])
    check.holds("flag", True)
    assert check.checks == 4
    assert not check.failures
    check.at_most("regret", 1.5, 1.0)
    check.close("routes", 0.0, 1e-3)
    check.expect("broken")
    assert len(check.failures) == 3
    assert check.failures[0].startswith("demo: regret exceeded by 0.5")


def test_partition_problem():
    assert verify.partition_problem(1, 30) is None
    assert verify.partition_problem(5, 5) is None
    checks, failures = verify.check_structure(64)
    assert checks == 64 * 65 // 2
    assert not failures


def test_hedge_and_squint_checks():
    for seed in range(3):
        _, failures = verify.check_hedge(seed)
        assert not failures
    # seed 0 uses a skewed prior
    for seed in (0, 1):
        checks, failures = verify.check_squint(seed)
        assert checks > 0
        assert not failures


def test_squintce_checks():
    for args in ((0, 32, "uniform"), (1, 32, "jun"), (4, 32, "jun")):
        checks, failures = verify.check_squintce(args)
        assert checks > 0
        assert not failures


def test_verify_runs_named_suites():
    results = verify.verify(["hedge", "squint-ce-uniform"], runs=2, seed=0, workers=1)
    assert [r.name for r in results] == ["hedge", "squint-ce-uniform"]
    assert all(r.ok for r in results)
    assert all(r.checks > 0 for r in results)

import importlib.resources

import pytest

from carvelift.inputs import SystemInput
from carvelift.lang.parser import parse

SUBJECT_NAMES = ["keycheck", "mini_dc", "mini_sed", "mini_cut", "mini_tac"]


def subject_source(name: str) -> str:
    res = importlib.resources.files("carvelift") / "subjects" / f"{name}.ml"
    return res.read_text(encoding="utf-8")


def load_subject(name: str):
    return parse(subject_source(name))


def mk_input(argv=(), stdin=b"") -> SystemInput:
    return SystemInput(tuple(bytes(a) for a in argv), bytes(stdin))


@pytest.fixture(scope="session")
def subjects():
    return {name: load_subject(name) for name in SUBJECT_NAMES}


def random_input_for(name: str, rng) -> SystemInput:
    """A plausible random system input for a bundled subject.

    Inputs mix well-formed and junk shapes so runs exercise both the happy
    paths and the error handling of each subject.
    """
    if name == "keycheck":
        pool = [b"admin", b"guest", b"root", b"d7wfv", b"#anon", b"",
                b"opensesame", b"guest123", b"a" * 20]
        argv = []
        for _ in range(rng.randrange(4)):
            if rng.randrange(3):
                argv.append(rng.choice(pool))
            else:
                argv.append(rng.randbytes(rng.randrange(9)))
        return mk_input(argv)
    if name == "mini_dc":
        alphabet = b"0123456789 +pdx"
        n = rng.randrange(14)
        return mk_input((), bytes(rng.choice(alphabet) for _ in range(n)))
    if name == "mini_sed":
        script = bytes(rng.choice(b"pdqx") for _ in range(rng.randrange(4)))
        lines = [rng.randbytes(rng.randrange(6)).replace(b"\n", b".")
                 for _ in range(rng.randrange(4))]
        argv = [script] if rng.randrange(4) else []
        return mk_input(argv, b"".join(ln + b"\n" for ln in lines))
    if name == "mini_cut":
        specs = [b"1", b"2-3", b"1-2", b"9-1", b"0", b"x", b"2-", b"-3"]
        argv = [rng.choice(specs)] if rng.randrange(5) else []
        lines = []
        for _ in range(rng.randrange(4)):
            fields = [rng.randbytes(rng.randrange(4)).replace(b",", b".").replace(b"\n", b".")
                      for _ in range(rng.randrange(5))]
            lines.append(b",".join(fields))
        return mk_input(argv, b"".join(ln + b"\n" for ln in lines))
    if name == "mini_tac":
        body = rng.randbytes(rng.randrange(30))
        return mk_input((), body)
    raise ValueError(f"unknown subject {name!r}")


# One summary line per acceptance criterion, keyed by test base name.
ACCEPTANCE_LABELS = {
    "test_criterion_1_carving_fidelity":
        "carved contexts replay to identical coverage",
    "test_criterion_2_mapping_matches_brute_force":
        "mapping equals a brute-force occurrence scan",
    "test_criterion_3_identity_lift_reproduces_origin":
        "identity lift reproduces the origin input",
    "test_criterion_4_bridge_beats_baseline_on_keycheck":
        "bridge reaches the password check, baseline does not",
    "test_criterion_5_false_positives_filtered":
        "lift outcomes fully classified and effective inputs replay",
    "test_criterion_6_non_decimal_negative_control":
        "non-parameterizable subject degrades to baseline",
    "test_criterion_7_quit_branch_discovery":
        "mini_sed quit branch found with a discrete coverage jump",
    "test_criterion_8_unit_speedup":
        "unit executions at least 10x faster than system runs",
    "test_criterion_9_deterministic_campaigns":
        "step-clock campaigns reproduce bit-for-bit",
}


def _criterion_key(nodeid: str) -> str | None:
    base = nodeid.rsplit("::", 1)[-1].split("[", 1)[0]
    return base if base in ACCEPTANCE_LABELS else None


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    seen: dict[str, str] = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            key = _criterion_key(getattr(rep, "nodeid", ""))
            if key is None:
                continue
            verdict = "PASS" if outcome == "passed" else "FAIL"
            if seen.get(key) != "FAIL":
                seen[key] = verdict
    if not seen:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for idx, (key, label) in enumerate(ACCEPTANCE_LABELS.items(), start=1):
        if key in seen:
            terminalreporter.write_line(
                f"criterion {idx} ({label}): {seen[key]}")

"""Shared pytest config: per-criterion summary for the acceptance suite."""

import re

CRITERION_RE = re.compile(r"test_acceptance\.py::.*::(test_c(\d+)[a-z]?_[a-z0-9_]+)")

TITLES = {
    "01": "gradient correctness vs central finite differences",
    "02": "gradient scoping bitwise-equal to constant-prefix reference",
    "03": "forward-pass and tracked-call accounting",
    "04": "effective depth formula values",
    "05": "overfit: 100% train exact-match on 16 fixed puzzles",
    "06": "desk-scale generalization and T=3 vs T=1 direction",
    "07": "feature-count ablation direction (single/multi z vs two-feature)",
    "08": "parameter counts at paper scale",
    "09": "EMA closed form and shadow-weight evaluation",
    "10": "data properties: augmentations, dihedral group, maze oracle, round trips",
    "11": "protocol oracles: majority vote and two-attempt scoring",
    "12": "bitwise training determinism",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = CRITERION_RE.search(rep.nodeid)
            if not m:
                continue
            cid = m.group(2)
            status = "PASS" if outcome == "passed" else "FAIL"
            # a criterion spanning several tests fails if any part failed
            if lines.get(cid) != "FAIL":
                lines[cid] = status if lines.get(cid) in (None, "PASS") else lines[cid]
            if status == "FAIL":
                lines[cid] = "FAIL"
    if not lines:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for cid in sorted(lines):
        title = TITLES.get(cid, "")
        terminalreporter.write_line(f"criterion {int(cid):2d} [{lines[cid]}] {title}")

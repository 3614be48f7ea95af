import io
import random
from datetime import date

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import visit
from provnet.assignment import (
    IMPUTED_PCP,
    PLURALITY,
    assign_by_pcp,
    assign_by_plurality,
    impute_pcp,
    in_community_fractions,
    read_assignment_csv,
    write_assignment_csv,
)
from provnet.claims import Provider, Visit

PART = {"A1": 1, "A2": 1, "B1": 2, "B2": 2, "C1": 3}


def test_single_community_patient():
    r = assign_by_plurality([visit("P", "A1", 1), visit("P", "A2", 2)], PART)
    assert r.community_of_patient == {"P": 1}
    assert r.visit_fraction["P"] == 1.0 and r.spend_fraction["P"] == 1.0


def test_three_two_split():
    vs = [visit("P", "A1", d) for d in (1, 2, 3)] + [visit("P", "B1", d) for d in (4, 5)]
    r = assign_by_plurality(vs, PART)
    assert r.community_of_patient["P"] == 1
    assert r.visit_fraction["P"] == pytest.approx(0.6)


def test_no_major_visits_unassigned():
    r = assign_by_plurality([visit("P", "Z9")], PART)
    assert r.community_of_patient == {"P": None}
    assert r.visit_fraction["P"] is None


def test_tie_broken_by_spend_then_id():
    vs = [visit("P", "A1", 1, 10.0), visit("P", "B1", 2, 20.0)]
    assert assign_by_plurality(vs, PART).community_of_patient["P"] == 2
    vs = [visit("Q", "B1", 1, 10.0), visit("Q", "A1", 2, 10.0)]
    assert assign_by_plurality(vs, PART).community_of_patient["Q"] == 1


def test_outside_visits_count_in_denominator():
    vs = [visit("P", "A1", 1), visit("P", "Z9", 2), visit("P", "Z9", 3), visit("P", "A2", 4)]
    r = assign_by_plurality(vs, PART)
    assert r.visit_fraction["P"] == 0.5


def random_visits(seed, n_pat=1000):
    rng = random.Random(seed)
    npis = list(PART) + ["X1", "X2"]
    out = []
    for p in range(n_pat):
        for d in range(rng.randint(1, 12)):
            out.append(Visit(f"P{p:04d}", rng.choice(npis), date(2014, 1 + d, rng.randint(1, 28)), round(rng.uniform(1, 500), 2), "Family Medicine"))
    return out


def brute_plurality(vs, part):
    by_pat = {}
    for v in vs:
        by_pat.setdefault(v.patient_id, []).append(v)
    out = {}
    for pid, pv in by_pat.items():
        best = None
        for c in sorted(set(part.values())):
            n = sum(part.get(v.npi) == c for v in pv)
            s = sum(v.paid_amount for v in pv if part.get(v.npi) == c)
            if n and (best is None or (n, s) > best[0]):
                best = ((n, s), c)
        out[pid] = best[1] if best else None
    return out


@pytest.mark.parametrize("seed", range(3))
def test_plurality_equals_brute_force_and_is_maximal(seed):
    vs = random_visits(seed)
    r = assign_by_plurality(vs, PART)
    assert r.community_of_patient == brute_plurality(vs, PART)
    counts = {}
    for v in vs:
        c = PART.get(v.npi)
        if c is not None:
            counts.setdefault(v.patient_id, {}).setdefault(c, 0)
            counts[v.patient_id][c] += 1
    for pid, c in r.assigned().items():
        for other in set(PART.values()):
            assert counts[pid].get(other, 0) <= counts[pid][c]
        assert 0 <= r.visit_fraction[pid] <= 1
        assert 0 <= r.spend_fraction[pid] <= 1


# -- PCP imputation ----------------------------------------------------------

DIRECTORY = {
    "A1": Provider("A1", "Family Medicine"),
    "A2": Provider("A2", "Cardiology"),
    "B1": Provider("B1", "Internal Medicine"),
    "B2": Provider("B2", "Dermatology"),
    "C1": Provider("C1", "Pediatrics"),
}


def test_impute_pcp_counts():
    vs = [visit("P", "A1", d) for d in (1, 2, 3)] + [visit("P", "B1", 4)]
    assert impute_pcp(vs, DIRECTORY) == {"P": "A1"}


def test_impute_pcp_none_without_pcp_visits():
    assert impute_pcp([visit("P", "A2"), visit("P", "B2", 2)], DIRECTORY) == {}


def test_impute_pcp_tie_most_recent():
    vs = [visit("P", "A1", 1), visit("P", "A1", 2), visit("P", "B1", 3), visit("P", "B1", 9)]
    assert impute_pcp(vs, DIRECTORY) == {"P": "B1"}
    vs = [visit("P", "A1", 5), visit("P", "B1", 5)]
    assert impute_pcp(vs, DIRECTORY) == {"P": "A1"}


def test_impute_pcp_window():
    vs = [
        Visit("P", "A1", date(2013, 3, 1), 1.0, "x"),
        Visit("P", "A1", date(2013, 4, 1), 1.0, "x"),
        Visit("P", "B1", date(2014, 3, 1), 1.0, "x"),
    ]
    # the two A1 visits fall at or before the window start
    assert impute_pcp(vs, DIRECTORY) == {"P": "B1"}
    assert impute_pcp(vs, DIRECTORY, window_months=24) == {"P": "A1"}
    with pytest.raises(ValueError):
        impute_pcp(vs, DIRECTORY, window_months=0)


def test_assign_by_pcp_cases():
    vs = [visit("P", "B1"), visit("Q", "A2")]
    r = assign_by_pcp(impute_pcp(vs, DIRECTORY), PART, vs)
    assert r.scheme == IMPUTED_PCP
    assert r.community_of_patient == {"P": 2, "Q": None}


@pytest.mark.parametrize("seed", range(3))
def test_assign_by_pcp_is_composition(seed):
    vs = random_visits(seed, 300)
    imputed = impute_pcp(vs, DIRECTORY)
    r = assign_by_pcp(imputed, PART, vs)
    for pid, c in r.community_of_patient.items():
        assert c == (PART.get(imputed[pid]) if pid in imputed else None)


@pytest.mark.parametrize("seed", range(3))
def test_plurality_dominates_pcp_per_patient(seed):
    vs = random_visits(seed)
    plur = assign_by_plurality(vs, PART)
    pcp = assign_by_pcp(impute_pcp(vs, DIRECTORY), PART, vs)
    for pid, c in pcp.assigned().items():
        assert plur.visit_fraction[pid] >= pcp.visit_fraction[pid]


# -- fractions ---------------------------------------------------------------


def test_pooled_fractions_hand_computed():
    vs = [
        visit("P", "A1", 1, 100.0), visit("P", "A2", 2, 100.0), visit("P", "A1", 3, 100.0), visit("P", "B1", 4, 100.0),
        visit("Q", "A1", 1, 50.0), visit("Q", "A1", 2, 50.0),
        visit("R", "B1", 1, 30.0), visit("R", "A1", 2, 10.0), visit("R", "B2", 3, 60.0),
    ]
    r = assign_by_plurality(vs, PART)
    f = in_community_fractions(r, vs, PART)
    assert f.patient_visit["P"] == 0.75
    assert f.patient_spend["Q"] == 1.0
    assert f.pooled_utilization == {1: pytest.approx(5 / 6), 2: pytest.approx(2 / 3)}
    assert f.pooled_spend == {1: pytest.approx(400 / 500), 2: pytest.approx(90 / 100)}
    assert f.mean_utilization[1] == pytest.approx((0.75 + 1.0) / 2)
    assert f.overall_utilization == pytest.approx(7 / 9)


@given(st.integers(0, 1000), st.sampled_from([2.0, 0.25, 1000.0]))
@settings(max_examples=20, deadline=None)
def test_spend_fraction_scale_invariant(seed, alpha):
    vs = random_visits(seed, 40)
    scaled = [Visit(v.patient_id, v.npi, v.service_date, v.paid_amount * alpha, v.specialty) for v in vs]
    a = assign_by_plurality(vs, PART)
    b = assign_by_plurality(scaled, PART)
    assert a.community_of_patient == b.community_of_patient
    for pid in a.spend_fraction:
        if a.spend_fraction[pid] is None:
            assert b.spend_fraction[pid] is None
        else:
            assert a.spend_fraction[pid] == pytest.approx(b.spend_fraction[pid], rel=1e-12)


def test_assignment_csv_round_trip():
    vs = random_visits(5, 50)
    r = assign_by_plurality(vs, PART)
    buf = io.StringIO()
    write_assignment_csv(r, buf)
    assert buf.getvalue().splitlines()[0] == "patient_id,scheme,community_id,visit_fraction,spend_fraction"
    back = read_assignment_csv(io.StringIO(buf.getvalue()))
    assert back.scheme == PLURALITY
    assert back.community_of_patient == r.community_of_patient
    assert back.visit_fraction == r.visit_fraction and back.spend_fraction == r.spend_fraction

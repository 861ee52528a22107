import math

import pytest
import torch

from cfdet.losses import loss_cf, loss_cl, loss_sp


def t(x):
    # float64 keeps the closed-form fixtures exact to 1e-9.
    return torch.tensor(float(x), dtype=torch.float64)


# ---------------------------------------------------------------------------
# Counterfactual loss


def test_cf_benign_ideal_is_zero():
    assert loss_cf(t(0), t(0), t(0)).item() == pytest.approx(0.0, abs=1e-9)


def test_cf_flagged_ideal_is_zero():
    assert loss_cf(t(1), t(0), t(1)).item() == pytest.approx(0.0, abs=1e-9)


def test_cf_flagged_uninformative_is_log2():
    assert loss_cf(t(0), t(0), t(1)).item() == pytest.approx(math.log(2), abs=1e-9)


def test_cf_nonnegative_on_unit_box():
    grid = torch.linspace(0, 1, 11)
    for ps in grid:
        for pr in grid:
            for y in (t(0), t(1)):
                assert loss_cf(ps, pr, y).item() >= -1e-9


def test_cf_zero_only_at_ideal_points():
    grid = torch.linspace(0, 1, 21)
    for ps in grid:
        for pr in grid:
            v0 = loss_cf(ps, pr, t(0)).item()
            if abs(v0) < 1e-12:
                assert ps.item() == 0 and pr.item() == 0
            v1 = loss_cf(ps, pr, t(1)).item()
            if abs(v1) < 1e-12:
                assert ps.item() == 1 and pr.item() == 0


# ---------------------------------------------------------------------------
# Sparsity loss


def test_sp_mixed_signs():
    assert loss_sp(torch.tensor([0.5, -0.25])).item() == pytest.approx(0.75)


def test_sp_zero_vector():
    assert loss_sp(torch.zeros(7)).item() == 0.0


def test_sp_matches_summation_oracle():
    gen = torch.Generator().manual_seed(5)
    w = torch.randn(200, generator=gen)
    assert loss_sp(w).item() == pytest.approx(sum(abs(x) for x in w.tolist()), rel=1e-6)


# ---------------------------------------------------------------------------
# Classification loss


@pytest.fixture()
def classifier():
    torch.manual_seed(2)
    return torch.nn.Linear(8, 1)


def test_cl_perfect_prediction_near_zero(classifier):
    z = torch.randn(8)
    with torch.no_grad():
        logit = classifier(z).item()
    y = t(1 if logit > 0 else 0)
    # Scale the embedding to saturate the sigmoid toward the label.
    value = loss_cl(z * 60, z * 60, y, classifier).item()
    assert value == pytest.approx(0.0, abs=1e-3)


def test_cl_coin_flip_is_ln2(classifier):
    with torch.no_grad():
        classifier.weight.zero_()
        classifier.bias.zero_()
    z = torch.randn(8)
    assert loss_cl(z, z, t(1), classifier).item() == pytest.approx(math.log(2), abs=1e-7)


def test_cl_matches_bce_oracle(classifier):
    gen = torch.Generator().manual_seed(8)
    for _ in range(50):
        z_g = torch.randn(8, generator=gen)
        z_s = torch.randn(8, generator=gen)
        y = float(torch.randint(0, 2, (1,), generator=gen).item())
        p = torch.sigmoid(classifier(0.5 * (z_g + z_s))).item()
        expected = -(y * math.log(p) + (1 - y) * math.log(1 - p))
        got = loss_cl(z_g, z_s, t(y), classifier).item()
        assert got == pytest.approx(expected, rel=1e-5)


def test_cl_uses_mean_merge(classifier):
    z = torch.randn(8)
    a = loss_cl(z, z, t(1), classifier).item()
    b = loss_cl(2 * z, torch.zeros(8), t(1), classifier).item()
    assert a == pytest.approx(b, rel=1e-6)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamvq.autodiff import Tensor, sum_all
from beamvq.codebank import CodeBank, straight_through, vq_loss_terms
from beamvq.errors import ShapeError

from helpers import leaf, max_rel_error, numeric_grad


def brute_topk(codes: np.ndarray, z: np.ndarray, k: int) -> np.ndarray:
    """Exhaustive float64 distance sort, ties to the lower index."""
    out = []
    for q in np.atleast_2d(z).astype(np.float64):
        d = [(float(np.sum((q - c.astype(np.float64)) ** 2)), i) for i, c in enumerate(codes)]
        out.append([i for _, i in sorted(d)[:k]])
    return np.array(out)


def test_small_bank_example():
    bank = CodeBank(codes=np.array([[0, 0], [1, 0], [0, 1], [2, 2]], dtype=np.float32))
    idx, vecs = bank.topk_lookup(np.array([0.9, 0.1], dtype=np.float32), 2)
    assert idx.tolist() == [[1, 0]]
    np.testing.assert_array_equal(vecs[0], [[1, 0], [0, 0]])


def test_query_equal_to_code():
    codes = np.random.default_rng(0).normal(size=(10, 4)).astype(np.float32)
    bank = CodeBank(codes=codes)
    idx, e = bank.quantize_nearest(codes[7])
    assert idx.tolist() == [7]
    np.testing.assert_array_equal(e[0], codes[7])


def test_equidistant_codes_prefer_lower_index():
    bank = CodeBank(codes=np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=np.float32))
    idx, _ = bank.topk_lookup(np.zeros(2, dtype=np.float32), 4)
    assert idx.tolist() == [[0, 1, 2, 3]]
    assert bank.quantize_nearest(np.zeros(2, dtype=np.float32))[0].tolist() == [0]


def test_duplicate_codes_tie_to_lower_index():
    codes = np.array([[0.5, 0.5], [0.1, 0.2], [0.5, 0.5], [0.1, 0.2]], dtype=np.float32)
    idx, _ = CodeBank(codes=codes).topk_lookup(np.array([0.1, 0.2], dtype=np.float32), 3)
    assert idx.tolist() == [[1, 3, 0]]


def test_k_larger_than_bank_rejected():
    with pytest.raises(ValueError, match="K"):
        CodeBank(4, 2).topk_lookup(np.zeros(2), 5)


def test_query_dimension_checked():
    with pytest.raises(ShapeError):
        CodeBank(4, 3).topk_lookup(np.zeros((2, 2)), 1)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), size=st.integers(1, 40), dim=st.integers(1, 8),
       data=st.data())
def test_topk_matches_exhaustive_sort(seed, size, dim, data):
    rng = np.random.default_rng(seed)
    k = data.draw(st.integers(1, size))
    # quantised values make exact ties common
    codes = rng.integers(-3, 4, size=(size, dim)).astype(np.float32) / 2
    z = rng.integers(-3, 4, size=(5, dim)).astype(np.float32) / 2
    idx, vecs = CodeBank(codes=codes).topk_lookup(z, k)
    np.testing.assert_array_equal(idx, brute_topk(codes, z, k))
    np.testing.assert_array_equal(vecs, codes[idx])


def test_straight_through_forward_and_gradient():
    z = leaf(np.array([[0.2, 0.4]]))
    e = Tensor(np.array([[1.0, -1.0]]))
    q = straight_through(z, e)
    np.testing.assert_array_equal(q.data, e.data)
    sum_all(q).backward()
    np.testing.assert_array_equal(z.grad, [[1.0, 1.0]])


def test_vq_terms_zero_when_equal():
    z = np.random.default_rng(2).normal(size=(3, 4))
    cb, cm = vq_loss_terms(Tensor(z), Tensor(z.copy()))
    assert cb.item() == 0.0 and cm.item() == 0.0


def test_commitment_gradient_semantics():
    rng = np.random.default_rng(3)
    bank = CodeBank(codes=rng.normal(size=(6, 3)))
    z0 = rng.normal(size=(4, 3))
    z = leaf(z0.copy())
    idx, _ = bank.quantize_nearest(z0)
    e = bank.lookup(idx)
    _, commitment = vq_loss_terms(z, e)
    commitment.backward()
    np.testing.assert_allclose(z.grad, 2 * (z0 - bank.codes.data[idx]))
    assert bank.codes.grad is None or not np.any(bank.codes.grad)


def test_codebook_term_moves_codes_only():
    rng = np.random.default_rng(4)
    codes0 = rng.normal(size=(5, 2))
    bank = CodeBank(codes=codes0)
    bank.codes.data = codes0.copy()  # float64 for the check
    z0 = rng.normal(size=(3, 2))
    z = leaf(z0.copy())
    idx = np.array([0, 2, 2])
    codebook, _ = vq_loss_terms(z, bank.lookup(idx))
    codebook.backward()
    assert z.grad is None

    def f(c):
        return float(np.sum((z0 - c[idx]) ** 2))

    (fd,) = numeric_grad(f, [codes0.copy()])
    assert max_rel_error(bank.codes.grad, fd, floor=1e-6) < 1e-4


def test_commitment_fd_with_frozen_code():
    rng = np.random.default_rng(5)
    z0, e0 = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    z = leaf(z0.copy())
    _, cm = vq_loss_terms(z, Tensor(e0), reduction="mean")
    cm.backward()
    (fd,) = numeric_grad(lambda a: float(np.mean((a - e0) ** 2)), [z0.copy()])
    assert max_rel_error(z.grad, fd, floor=1e-6) < 1e-4


def test_lookup_gradient_scatters_into_rows():
    bank = CodeBank(codes=np.zeros((3, 2)))
    out = bank.lookup(np.array([1, 1, 2]))
    sum_all(out).backward()
    np.testing.assert_array_equal(bank.codes.grad, [[0, 0], [2, 2], [1, 1]])


def test_kmeans_init_places_codes_on_clusters():
    rng = np.random.default_rng(6)
    centers = np.array([[0, 0], [5, 5], [-5, 5]], dtype=np.float32)
    samples = np.concatenate([c + 0.01 * rng.normal(size=(50, 2)) for c in centers]).astype(np.float32)
    bank = CodeBank(3, 2)
    bank.kmeans_init(samples, iters=20, seed=1)
    idx, _ = bank.quantize_nearest(centers)
    assert len(set(idx.tolist())) == 3
    np.testing.assert_allclose(bank.codes.data[idx], centers, atol=0.05)

from __future__ import annotations

import math
import os
import subprocess
import sys

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from sympy.matrices.normalforms import smith_normal_form

from diffeokit import kernels, simplicial as sx


@pytest.mark.parametrize("size", [0, 1, 17, 1000])
def test_flat_bump_backends_agree(size):
    t = np.random.default_rng(size).uniform(-1, 3, size=size)
    # the two exp implementations may differ in the last ulp
    np.testing.assert_allclose(kernels.flat_bump_numba(t), kernels.flat_bump_numpy(t),
                               rtol=1e-15, atol=0)


def test_flat_bump_against_math():
    for t in (0.01, 0.1, 0.5, 2.0):
        assert kernels.flat_bump(np.array([t]))[0] == pytest.approx(math.exp(-1 / t), rel=1e-15)
    assert kernels.flat_bump(np.array([0.0, -1.0]))[:].tolist() == [0.0, 0.0]


@pytest.mark.parametrize("eps", [0.1, 0.2, 0.45])
def test_cutoff_backends_agree(eps):
    t = np.random.default_rng(1).uniform(-0.5, 1.5, size=2000)
    np.testing.assert_allclose(kernels.cutoff_numba(t, eps), kernels.cutoff_numpy(t, eps),
                               rtol=1e-15, atol=0)


@pytest.mark.parametrize("eps", [0.1, 0.2, 0.3])
def test_section_backends_agree(eps):
    th = np.random.default_rng(2).uniform(-0.5, 1.5, size=2000)
    ca, xa = kernels.section_numba(th, eps)
    cb, xb = kernels.section_numpy(th, eps)
    np.testing.assert_array_equal(ca, cb)
    np.testing.assert_allclose(xa, xb, rtol=0, atol=1e-15)


def sympy_invariants(m):
    snf = smith_normal_form(sympy.Matrix(m), domain=sympy.ZZ)
    d = [abs(int(snf[i, i])) for i in range(min(snf.shape))]
    return sorted(v for v in d if v)


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.int64, st.tuples(st.integers(1, 5), st.integers(1, 5)),
                  elements=st.integers(-4, 4)))
def test_smith_against_sympy(m):
    got = sorted(int(v) for v in kernels.smith_diagonal_numpy(m) if v)
    assert got == sympy_invariants(m)
    assert sorted(int(v) for v in kernels.smith_diagonal_numba(m) if v) == got


@pytest.mark.parametrize("q", [1, 2, 3, 4])
def test_smith_boundary_matrices(q):
    a = sx.product(sx.delta(2), sx.delta(2))
    m = sx.boundary_matrix(a, q)
    np.testing.assert_array_equal(kernels.smith_diagonal_numba(m), kernels.smith_diagonal_numpy(m))


def test_smith_torsion_example():
    # Z/2 torsion: diag(1, 2) up to unimodular change of basis
    m = np.array([[2, 4], [4, 6]])
    assert sorted(int(v) for v in kernels.smith_diagonal(m)) == [2, 2]


def test_numpy_backend_by_env(tmp_path):
    env = dict(os.environ, DIFFEOKIT_BACKEND="numpy")
    code = ("import diffeokit, diffeokit.kernels as k;"
            "print(diffeokit.backend_name(), k.flat_bump is k.flat_bump_numpy)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True).stdout.split()
    assert out == ["numpy", "True"]


def test_numpy_backend_suite_passes(tmp_path):
    env = dict(os.environ, DIFFEOKIT_BACKEND="numpy")
    r = subprocess.run([sys.executable, "-m", "diffeokit", "suite", "simplicial",
                        "--out", str(tmp_path)], env=env, capture_output=True, text=True)
    assert r.returncode == 0, r.stdout + r.stderr

# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loop for exact-update solver runs.

Same update arithmetic as the numpy fallback in _slow.py; kept branch-free
inside the step so a multi-thousand-iteration run stays in C. Logits are
advanced in place.
"""

from libc.math cimport exp, log

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef enum:
    _EXTRAGRADIENT = 0
    _MIRROR = 1
    _PAIR_COV = 2
    _MIXTURE = 3
    _PG = 4

ALG_EXTRAGRADIENT = _EXTRAGRADIENT
ALG_MIRROR = _MIRROR
ALG_PAIR_COV = _PAIR_COV
ALG_MIXTURE = _MIXTURE
ALG_PG = _PG


cdef double _softmax(const double[::1] logits, double[::1] out, Py_ssize_t n) noexcept nogil:
    """Fill out with probabilities; returns the log-normalizer."""
    cdef Py_ssize_t i
    cdef double m = logits[0]
    cdef double s = 0.0
    for i in range(1, n):
        if logits[i] > m:
            m = logits[i]
    for i in range(n):
        out[i] = exp(logits[i] - m)
        s += out[i]
    for i in range(n):
        out[i] /= s
    return m + log(s)


cdef void _matvec(const double[:, ::1] a, const double[::1] x, double[::1] out, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += a[i, j] * x[j]
        out[i] = acc


cdef void _mix(const double[::1] logits, const double[::1] ref, double gamma, double[::1] out,
               Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = (1.0 - gamma) * logits[i] + gamma * ref[i]


cdef void _mirror(const double[::1] logits, const double[::1] ref, const double[::1] pref_vec,
                  double eta_beta, double beta, double[::1] out, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = (1.0 - eta_beta) * logits[i] + eta_beta * (ref[i] + pref_vec[i] / beta)


cdef double _lse(const double[::1] v, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double m = v[0]
    cdef double s = 0.0
    for i in range(1, n):
        if v[i] > m:
            m = v[i]
    for i in range(n):
        s += exp(v[i] - m)
    return m + log(s)


def run_exact(int alg, const double[:, ::1] pref, const double[::1] ref_logits, double beta,
              double eta, double gamma, double[::1] logits, long n_steps):
    cdef Py_ssize_t n = logits.shape[0]
    cdef double eta_beta = eta * beta
    cdef double lse, lse_ref, wsum, acc
    cdef long t
    cdef Py_ssize_t i
    scratch = np.empty((5, n), dtype=np.float64)
    cdef double[::1] probs = scratch[0]
    cdef double[::1] pvec = scratch[1]
    cdef double[::1] half = scratch[2]
    cdef double[::1] mixed = scratch[3]
    cdef double[::1] work = scratch[4]

    with nogil:
        for t in range(n_steps):
            if alg == _EXTRAGRADIENT:
                if gamma != 0.0:
                    _mix(logits, ref_logits, gamma, mixed, n)
                    _softmax(mixed, probs, n)
                else:
                    _softmax(logits, probs, n)
                _matvec(pref, probs, pvec, n)
                _mirror(logits, ref_logits, pvec, eta_beta, beta, half, n)
                if gamma != 0.0:
                    _mix(half, ref_logits, gamma, mixed, n)
                    _softmax(mixed, probs, n)
                else:
                    _softmax(half, probs, n)
                _matvec(pref, probs, pvec, n)
                _mirror(logits, ref_logits, pvec, eta_beta, beta, logits, n)
            elif alg == _MIRROR:
                _softmax(logits, probs, n)
                _matvec(pref, probs, pvec, n)
                _mirror(logits, ref_logits, pvec, eta_beta, beta, logits, n)
            elif alg == _PAIR_COV:
                _softmax(logits, probs, n)
                _matvec(pref, probs, pvec, n)
                # v = logits - ref - pvec / beta; step along (diag(p) - p p^T) v
                wsum = 0.0
                for i in range(n):
                    work[i] = probs[i] * (logits[i] - ref_logits[i] - pvec[i] / beta)
                    wsum += work[i]
                for i in range(n):
                    logits[i] = logits[i] - (eta_beta * n) * (work[i] - probs[i] * wsum)
            elif alg == _MIXTURE:
                _mix(logits, ref_logits, gamma, mixed, n)
                _softmax(mixed, probs, n)
                _matvec(pref, probs, pvec, n)
                _mirror(logits, ref_logits, pvec, eta_beta, beta, logits, n)
            elif alg == _PG:
                lse = _softmax(logits, probs, n)
                _mix(logits, ref_logits, gamma, mixed, n)
                _softmax(mixed, work, n)
                _matvec(pref, work, pvec, n)
                lse_ref = _lse(ref_logits, n)
                # advantage = pref - beta * log(probs / ref_probs), score step
                wsum = 0.0
                for i in range(n):
                    acc = pvec[i] - beta * ((logits[i] - lse) - (ref_logits[i] - lse_ref))
                    work[i] = probs[i] * acc
                    wsum += work[i]
                for i in range(n):
                    logits[i] = logits[i] + eta * (work[i] - wsum * probs[i])

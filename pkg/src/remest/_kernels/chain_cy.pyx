# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled chain-simulation kernel; arithmetic twin of chain_py.py."""


def simulate_chunk(const signed char[:, ::1] actions, const double[::1] g_table,
                   const double[::1] cost_table, const double[:, ::1] uniforms,
                   int initial_q, double[::1] step_mse, double[::1] step_aoi,
                   double[::1] run_mse, double[::1] run_aoi):
    """Simulate one contiguous chunk of runs of the (r, q) decision chain.

    Same contract as the pure-Python twin: accumulates per-step cost/age
    sums across runs and per-run horizon averages, returns the number of
    steps at which q saturated at the cost-table end.
    """
    cdef Py_ssize_t n_runs = uniforms.shape[0]
    cdef Py_ssize_t horizon = uniforms.shape[1]
    cdef int r_cap = <int>actions.shape[0] - 1
    cdef int q_max = <int>actions.shape[1] - 1
    cdef int table_end = <int>cost_table.shape[0] - 1
    cdef Py_ssize_t i, k
    cdef int r, q, qa
    cdef long saturated = 0
    cdef double c, total_c, total_a

    with nogil:
        for i in range(n_runs):
            r = 0
            q = initial_q
            total_c = 0.0
            total_a = 0.0
            for k in range(horizon):
                c = cost_table[q]
                step_mse[k] += c
                step_aoi[k] += q + 1
                total_c += c
                total_a += q + 1
                qa = q if q < q_max else q_max
                if actions[r, qa] == 0:
                    r = 0
                elif r < r_cap:
                    r += 1
                if uniforms[i, k] < g_table[r]:
                    q += 1
                    if q > table_end:
                        q = table_end
                        saturated += 1
                else:
                    q = r
            run_mse[i] = total_c / horizon
            run_aoi[i] = total_a / horizon
    return saturated

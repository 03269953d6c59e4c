"""Pure-Python twin of the compiled chain-simulation kernel.

Must stay arithmetically identical to chain_cy.pyx: same state updates,
same accumulation order, same saturation rules, so that both backends
produce bit-identical results from the same uniform draws.
"""

from __future__ import annotations

import numpy as np


def simulate_chunk(actions, g_table, cost_table, uniforms, initial_q,
                   step_mse, step_aoi, run_mse, run_aoi):
    """Simulate one contiguous chunk of runs of the (r, q) decision chain.

    Per step: accrue the staleness cost and age for the current q, look up
    the action, update the retransmission count, draw detection against
    g(r), update q. Adds per-step sums across runs into step_mse/step_aoi
    and writes per-run horizon averages into run_mse/run_aoi. Returns the
    number of steps at which q had to saturate at the cost-table end.
    """
    n_runs, horizon = uniforms.shape
    r_cap = actions.shape[0] - 1
    q_max = actions.shape[1] - 1
    table_end = len(cost_table) - 1

    act = [[int(v) for v in row] for row in actions]
    g = [float(v) for v in g_table]
    ct = [float(v) for v in cost_table]
    sm = [0.0] * horizon
    sa = [0.0] * horizon
    saturated = 0

    for i in range(n_runs):
        u = uniforms[i].tolist()
        r = 0
        q = initial_q
        total_c = 0.0
        total_a = 0.0
        for k in range(horizon):
            c = ct[q]
            aoi = q + 1
            sm[k] += c
            sa[k] += aoi
            total_c += c
            total_a += aoi
            qa = q if q < q_max else q_max
            if act[r][qa] == 0:
                r = 0
            elif r < r_cap:
                r += 1
            if u[k] < g[r]:
                q += 1
                if q > table_end:
                    q = table_end
                    saturated += 1
            else:
                q = r
        run_mse[i] = total_c / horizon
        run_aoi[i] = total_a / horizon

    step_mse += np.asarray(sm)
    step_aoi += np.asarray(sa)
    return saturated

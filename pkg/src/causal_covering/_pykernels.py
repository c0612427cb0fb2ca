"""Pure numpy implementations of the hot kernels.

Same signatures and bitwise-identical results as the compiled ``_ckernels``
module; selected automatically when the extension is unavailable.
"""
import numpy as np


def sample_rows(interventions, uniforms, latent_p, par_ptr, par_idx, cpt_ptr, cpt):
    n, n_obs = interventions.shape
    n_lat = latent_p.shape[0]
    vals = np.empty((n, n_lat + n_obs), dtype=np.uint8)
    if n_lat:
        vals[:, :n_lat] = uniforms[:, :n_lat] < latent_p
    for i in range(n_obs):
        col = n_lat + i
        iv = interventions[:, i]
        mask = np.zeros(n, dtype=np.int64)
        for j, p in enumerate(par_idx[par_ptr[i]:par_ptr[i + 1]]):
            mask |= vals[:, p].astype(np.int64) << j
        drawn = uniforms[:, col] < cpt[cpt_ptr[i] + mask]
        vals[:, col] = np.where(iv >= 0, iv, drawn)
    return vals[:, n_lat:]


def _step_indices(plan, s):
    # index arrays mapping each union assignment to an entry of each input table
    cache = plan.index_cache
    if s not in cache:
        n = int(plan.nunion[s])
        a = np.arange(1 << n, dtype=np.int64)
        idx = []
        for k in range(plan.in_ptr[s], plan.in_ptr[s + 1]):
            positions = plan.pos[plan.pos_ptr[k]:plan.pos_ptr[k + 1]]
            ix = np.zeros(1 << n, dtype=np.int64)
            for j, p in enumerate(positions):
                ix |= ((a >> p) & 1) << j
            idx.append(ix)
        cache[s] = idx
    return cache[s]


def run_plan(tables, plan):
    slots = list(tables)
    for s in range(len(plan.nunion)):
        n = int(plan.nunion[s])
        e = int(plan.elim[s])
        prod = None
        for k, ix in zip(range(plan.in_ptr[s], plan.in_ptr[s + 1]), _step_indices(plan, s)):
            t = slots[plan.in_slot[k]][ix]
            prod = t if prod is None else prod * t
        r = prod.reshape(1 << (n - 1 - e), 2, 1 << e)
        slots.append((r[:, 0, :] + r[:, 1, :]).ravel())
    result = 1.0
    for slot in plan.final_slots:
        result *= float(slots[slot][0])
    return result

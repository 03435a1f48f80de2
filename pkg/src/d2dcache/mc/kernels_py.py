"""Pure-numpy fallback kernels for the drop simulator.

The compiled extension (``d2dcache.mc._kernels``) implements the same two
functions with identical semantics; either backend must produce the same
links and interference sums for the same inputs, so the driver can switch
between them freely.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def match_links(pos, helper_user, helper_start, req_user, req_file,
                eligible, rc2, exclusive):
    """Resolve one round of nearest-helper link formation.

    Parameters
    ----------
    pos : (n, 2) float64
        User coordinates.
    helper_user : (H,) int64
        User indices holding each file, concatenated file by file.
    helper_start : (N_f + 1,) int64
        Bucket offsets into ``helper_user`` (bucket f = [start[f], start[f+1])).
    req_user, req_file : (m,) int64
        Requesting user and requested file per request.
    eligible : (n,) uint8
        1 if the user may serve as a transmitter this round.
    rc2 : float
        Squared collaboration distance.
    exclusive : bool
        False: every requester links to its nearest eligible holder.
        True: a holder serves at most one requester; contested holders go
        to their nearest requester and losers fall back to the next-nearest
        free holder (greedy in global distance order, which yields the same
        matching as round-based proposal/acceptance).

    Returns
    -------
    tx : (m,) int64
        Serving user per request, -1 if none.
    found : (m,) uint8
        1 if any other user within range holds the file (battery ignored).
    d2 : (m,) float64
        Squared link distance, inf when ``tx`` is -1.
    """
    m = req_user.shape[0]
    tx = np.full(m, -1, dtype=np.int64)
    found = np.zeros(m, dtype=np.uint8)
    d2 = np.full(m, np.inf)
    if m == 0:
        return tx, found, d2

    order = np.argsort(req_file, kind="stable")
    files = req_file[order]
    cuts = np.flatnonzero(np.diff(files)) + 1
    groups = np.split(order, cuts)

    pend_req: list[np.ndarray] = []
    pend_hlp: list[np.ndarray] = []
    pend_d2: list[np.ndarray] = []

    for grp in groups:
        f = req_file[grp[0]]
        bucket = helper_user[helper_start[f]:helper_start[f + 1]]
        if bucket.size == 0:
            continue
        users = req_user[grp]
        diff = pos[users][:, None, :] - pos[bucket][None, :, :]
        dist2 = np.einsum("ijk,ijk->ij", diff, diff)
        dist2[users[:, None] == bucket[None, :]] = np.inf
        in_range = dist2 <= rc2
        found[grp] = in_range.any(axis=1)
        dist2[~in_range] = np.inf
        dist2[:, eligible[bucket] == 0] = np.inf
        if not exclusive:
            col = np.argmin(dist2, axis=1)
            best = dist2[np.arange(len(grp)), col]
            ok = np.isfinite(best)
            tx[grp[ok]] = bucket[col[ok]]
            d2[grp[ok]] = best[ok]
        else:
            rr, hh = np.nonzero(np.isfinite(dist2))
            pend_req.append(grp[rr])
            pend_hlp.append(bucket[hh])
            pend_d2.append(dist2[rr, hh])

    if exclusive and pend_req:
        creq = np.concatenate(pend_req)
        chlp = np.concatenate(pend_hlp)
        cd2 = np.concatenate(pend_d2)
        busy = np.zeros(pos.shape[0], dtype=bool)
        taken = np.zeros(m, dtype=bool)
        for k in np.argsort(cd2, kind="stable"):
            r = creq[k]
            h = chlp[k]
            if taken[r] or busy[h]:
                continue
            taken[r] = True
            busy[h] = True
            tx[r] = h
            d2[r] = cd2[k]

    return tx, found, d2


def interference_power(rx_pos, dt_pos, gains, own_col, rx_col, alpha, trunc2):
    """Aggregate interference at each receiver from the round's transmitters.

    ``gains[i, j]`` is the fading power between receiver i and transmitter
    column j.  Column ``own_col[i]`` (the serving link) and column
    ``rx_col[i]`` (the receiver itself, when it is also transmitting) are
    excluded, as are transmitters beyond the squared truncation radius
    ``trunc2`` (pass inf for no truncation).

    Returns the (L,) interference power sums at unit transmit power.
    """
    if dt_pos.shape[0] == 0:
        return np.zeros(rx_pos.shape[0])
    diff = rx_pos[:, None, :] - dt_pos[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    with np.errstate(divide="ignore"):
        path = dist2 ** (-alpha / 2.0)
    path[dist2 > trunc2] = 0.0
    path[dist2 == 0.0] = 0.0
    rows = np.arange(rx_pos.shape[0])
    path[rows, own_col] = 0.0
    sel = rx_col >= 0
    path[rows[sel], rx_col[sel]] = 0.0
    return np.einsum("ij,ij->i", gains, path)

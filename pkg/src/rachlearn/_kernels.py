"""Hot numeric kernels: the per-run slot loop and the run-length Monte Carlo.

Written once in numba-compatible Python; :mod:`rachlearn._accel` decides
whether they run compiled or interpreted (``RACHLEARN_NO_NUMBA=1``). All
randomness comes from the ``numpy.random.Generator`` passed in, so the two
backends are bit-for-bit identical.

The slot loop mirrors the per-device reference machine in
:mod:`rachlearn.learning` on flat arrays: phase-2 windows become bit masks
(oldest observation in bit 0), messages live in per-device columns, and the
frontier is the set of last slot's participants.
"""

from __future__ import annotations

import numpy as np

from ._accel import njit

__all__ = ["simulate_run", "waiting_time_mc"]


@njit(cache=True)
def _sample_obs(rng, inside, true_state, s_max, miss_in, miss_out):
    # True state with probability 1 - miss, else uniform over the wrong states.
    if s_max == 1:
        return true_state
    q = miss_in if inside else miss_out
    if rng.random() < 1.0 - q:
        return true_state
    wrong = int(rng.random() * (s_max - 1))
    if wrong >= s_max - 1:
        wrong = s_max - 2
    w = wrong + 1
    if w >= true_state:
        w += 1
    return w


@njit(cache=True)
def _choose_favored(window, length, s_max):
    # Max observation count; ties go to the larger state.
    best_state = -1
    best_count = 0
    for s in range(1, s_max + 1):
        c = 0
        for i in range(length):
            if window[i] == s:
                c += 1
        if c > 0 and c >= best_count:
            best_state = s
            best_count = c
    return best_state


@njit(cache=True)
def waiting_time_mc(rng, alpha, p_success, trials):
    """Mean observations until ``alpha`` consecutive unfavored draws, by simulation.

    Deliberately the plainest possible per-observation loop so it stays an
    independent oracle; at p = 0.9, alpha = 4 a trial runs ~1e4 observations,
    so callers wanting speed should hand in a cheap bit generator (SFC64).
    """
    total = 0.0
    for _ in range(trials):
        run = 0
        n = 0
        while run < alpha:
            n += 1
            if rng.random() < p_success:
                run = 0
            else:
                run += 1
        total += n
    return total / trials


@njit(cache=True)
def simulate_run(
    rng,
    indptr,
    indices,
    group_start,
    group_members,
    tau,
    cf_rank,
    inside_rd,
    critical_ids,
    true_state,
    s_max,
    miss_in,
    miss_out,
    learn_enabled,
    k_obs,
    run_length,
    mem_bits,
    s_block_len,
    r_block_len,
    revert_scale,
    revert_pivot,
    beta_by_state,
    p_c,
    p_f,
    t_min,
    max_slots,
    stationary_stop,
):
    """One full run: learning hop + channel slot, repeated until quiet or cut off.

    Returns per-critical delays in slots (-1 = censored), the per-slot count
    of devices decided on the true state, per-device decision state, the
    per-slot intent/success counts, the slot the run ended on, and the
    revert total.
    """
    n = len(tau)
    n_a = len(critical_ids)
    p_total = p_c + p_f

    participated = np.zeros(n, np.bool_)
    decided = np.zeros(n, np.bool_)
    learned_state = np.zeros(n, np.int32)  # 0 none, -1 rejected, >= 1 a count
    beta_dev = np.zeros(n, np.int32)

    k_cap = k_obs - 1 if k_obs > 1 else 1
    p1_win = np.zeros((n, k_cap), np.int32)
    p1_len = np.zeros(n, np.int32)
    msg_phase = np.zeros(n, np.int8)
    p2_sf = np.zeros(n, np.int32)
    p2_win = np.zeros(n, np.uint64)
    p2_fav = np.zeros(n, np.uint8)
    p2_intact = np.zeros(n, np.uint8)
    p2_run = np.zeros(n, np.int32)
    p2_ne = np.zeros(n, np.int32)
    p2_bpos = np.zeros(n, np.int32)
    p2_bisr = np.zeros(n, np.uint8)

    frontier = np.empty(n, np.int32)
    frontier_n = 0
    next_frontier = np.empty(n, np.int32)

    offer_stamp = np.full(n, -1, np.int64)
    offer_cnt = np.zeros(n, np.int32)
    offer_choice = np.zeros(n, np.int32)
    receivers = np.empty(n, np.int32)

    scratch = np.zeros(max(k_obs, 1), np.int32)
    self_win = np.zeros((n_a, max(k_obs, 1)), np.int32)
    self_len = np.zeros(n_a, np.int32)

    pending = np.zeros(n, np.bool_)
    crit_pos = np.full(n, -1, np.int32)
    delay_slots = np.full(n_a, -1, np.int32)
    for ci in range(n_a):
        pending[critical_ids[ci]] = True
        crit_pos[critical_ids[ci]] = ci
    n_pending = n_a

    learned_correct = np.zeros(max_slots, np.int32)
    intents_per_slot = np.zeros(max_slots, np.int32)
    success_per_slot = np.zeros(max_slots, np.int32)

    pre_cnt = np.zeros(p_total, np.int32)
    pre_dev = np.full(p_total, -1, np.int32)
    used = np.empty(p_total, np.int32)

    one = np.uint64(1)
    zero64 = np.uint64(0)
    win_shift = np.uint64(mem_bits - 3) if mem_bits > 2 else zero64

    cur_correct = 0
    n_reverts = 0
    last_activity = 0
    end_slot = max_slots

    for t in range(max_slots):
        activity = False
        if learn_enabled:
            # --- one learning hop -------------------------------------------
            if t == 0:
                # urgent senders seed one chain each with their first observation
                for ci in range(n_a):
                    c = critical_ids[ci]
                    e = _sample_obs(rng, inside_rd[c], true_state, s_max, miss_in, miss_out)
                    participated[c] = True
                    self_win[ci, 0] = e
                    self_len[ci] = 1
                    if k_obs == 1:
                        s_f = e
                        decided[c] = True
                        learned_state[c] = s_f
                        beta_dev[c] = beta_by_state[s_f]
                        if s_f == true_state:
                            cur_correct += 1
                        msg_phase[c] = 2
                        p2_sf[c] = s_f
                        p2_win[c] = zero64
                        if mem_bits > 2:
                            p2_win[c] = one << win_shift  # own obs binarizes to favored
                        p2_fav[c] = 1
                        p2_intact[c] = 1
                        p2_run[c] = 0
                        p2_ne[c] = 0
                        p2_bpos[c] = 0
                        p2_bisr[c] = 1
                    else:
                        msg_phase[c] = 1
                        p1_win[c, 0] = e
                        p1_len[c] = 1
                    frontier[frontier_n] = c
                    frontier_n += 1
                    activity = True
            else:
                # offers: last slot's participants to untouched neighbors;
                # several offers resolve to one uniform pick (reservoir rule)
                nrecv = 0
                for fi in range(frontier_n):
                    f = frontier[fi]
                    for ptr in range(indptr[f], indptr[f + 1]):
                        j = indices[ptr]
                        if participated[j]:
                            continue
                        if offer_stamp[j] != t:
                            offer_stamp[j] = t
                            offer_cnt[j] = 1
                            offer_choice[j] = f
                            receivers[nrecv] = j
                            nrecv += 1
                        else:
                            offer_cnt[j] += 1
                            if rng.random() < 1.0 / offer_cnt[j]:
                                offer_choice[j] = f
                if nrecv > 0:
                    activity = True
                ordered = np.sort(receivers[:nrecv])
                next_n = 0
                for ri in range(nrecv):
                    j = ordered[ri]
                    f = offer_choice[j]
                    e = _sample_obs(rng, inside_rd[j], true_state, s_max, miss_in, miss_out)
                    participated[j] = True
                    if msg_phase[f] == 1:
                        length = p1_len[f]
                        if length + 1 < k_obs:
                            for i in range(length):
                                p1_win[j, i] = p1_win[f, i]
                            p1_win[j, length] = e
                            p1_len[j] = length + 1
                            msg_phase[j] = 1
                        else:
                            for i in range(length):
                                scratch[i] = p1_win[f, i]
                            scratch[length] = e
                            s_f = _choose_favored(scratch, length + 1, s_max)
                            decided[j] = True
                            learned_state[j] = s_f
                            beta_dev[j] = beta_by_state[s_f]
                            if s_f == true_state:
                                cur_correct += 1
                            win = zero64
                            if mem_bits > 2:
                                for i in range(length + 1):
                                    b = one if scratch[i] == s_f else zero64
                                    win = (win >> one) | (b << win_shift)
                            msg_phase[j] = 2
                            p2_sf[j] = s_f
                            p2_win[j] = win
                            p2_fav[j] = 1
                            p2_intact[j] = 1
                            p2_run[j] = 0
                            p2_ne[j] = 0
                            p2_bpos[j] = 0
                            p2_bisr[j] = 1
                    else:
                        s_f = p2_sf[f]
                        own_bit = 1 if e == s_f else 0
                        win = p2_win[f]
                        x = 1 if (win != zero64 or own_bit == 1) else 0
                        if x == 1:
                            runc = 0
                        else:
                            runc = p2_run[f] + 1
                            if runc > run_length:
                                runc = run_length
                        ne = p2_ne[f] + 1
                        reverted = False
                        if x == 0 and runc >= run_length:
                            d = ne - revert_pivot
                            ad = d if d >= 0 else -d
                            p_b = revert_scale * (1.0 - d / (1.0 + ad))
                            if rng.random() < p_b:
                                reverted = True
                        if reverted:
                            # restart as a fresh initiator seeded with this
                            # observation; a one-observation phase already decides
                            n_reverts += 1
                            if k_obs == 1:
                                decided[j] = True
                                learned_state[j] = e
                                beta_dev[j] = beta_by_state[e]
                                if e == true_state:
                                    cur_correct += 1
                                msg_phase[j] = 2
                                p2_sf[j] = e
                                p2_win[j] = one << win_shift if mem_bits > 2 else zero64
                                p2_fav[j] = 1
                                p2_intact[j] = 1
                                p2_run[j] = 0
                                p2_ne[j] = 0
                                p2_bpos[j] = 0
                                p2_bisr[j] = 1
                            else:
                                msg_phase[j] = 1
                                p1_win[j, 0] = e
                                p1_len[j] = 1
                        else:
                            fav = p2_fav[f]
                            intact = p2_intact[f]
                            bpos = p2_bpos[f]
                            bisr = p2_bisr[f]
                            if bisr == 1:
                                if x == 1:
                                    intact = 0
                            else:
                                if x == 0:
                                    intact = 0
                            bpos += 1
                            blen = r_block_len if bisr == 1 else s_block_len
                            if bpos >= blen:
                                if intact == 1:
                                    fav = 0 if bisr == 1 else 1
                                bisr = 1 - bisr
                                bpos = 0
                                intact = 1
                            decided[j] = True
                            if fav == 1:
                                learned_state[j] = s_f
                                beta_dev[j] = beta_by_state[s_f]
                                if s_f == true_state:
                                    cur_correct += 1
                            else:
                                learned_state[j] = -1
                            new_win = win
                            if mem_bits > 2:
                                new_win = (win >> one) | (
                                    (one if own_bit == 1 else zero64) << win_shift
                                )
                            msg_phase[j] = 2
                            p2_sf[j] = s_f
                            p2_win[j] = new_win
                            p2_fav[j] = fav
                            p2_intact[j] = intact
                            p2_run[j] = runc
                            p2_ne[j] = ne
                            p2_bpos[j] = bpos
                            p2_bisr[j] = bisr
                    next_frontier[next_n] = j
                    next_n += 1
                for i in range(next_n):
                    frontier[i] = next_frontier[i]
                frontier_n = next_n

            # urgent senders keep observing on their own until they can decide
            if k_obs > 1:
                for ci in range(n_a):
                    c = critical_ids[ci]
                    if decided[c] or self_len[ci] >= k_obs:
                        continue
                    if t == 0:
                        continue  # the seed observation was this slot's
                    e = _sample_obs(rng, inside_rd[c], true_state, s_max, miss_in, miss_out)
                    self_win[ci, self_len[ci]] = e
                    self_len[ci] += 1
                    activity = True
                    if self_len[ci] == k_obs:
                        s_f = _choose_favored(self_win[ci], k_obs, s_max)
                        decided[c] = True
                        learned_state[c] = s_f
                        beta_dev[c] = beta_by_state[s_f]
                        if s_f == true_state:
                            cur_correct += 1

        learned_correct[t] = cur_correct

        # --- channel slot ----------------------------------------------------
        g = t % t_min
        n_used = 0
        n_intents = 0
        for idx in range(group_start[g], group_start[g + 1]):
            dev = group_members[idx]
            if pending[dev]:
                continue  # takes its scheduled slot through the urgent branch
            if learned_state[dev] >= 1 and cf_rank[dev] < beta_dev[dev]:
                continue  # this preamble is reallocated; stay silent
            pre = p_c + cf_rank[dev]
            if pre_cnt[pre] == 0:
                used[n_used] = pre
                n_used += 1
            pre_cnt[pre] += 1
            pre_dev[pre] = dev
            n_intents += 1
        for ci in range(n_a):
            c = critical_ids[ci]
            if not pending[c]:
                continue
            if tau[c] == g:
                pre = p_c + cf_rank[c]
            else:
                b = beta_dev[c] if learned_state[c] >= 1 else 0
                pool = p_c + b
                k = int(rng.random() * pool)
                if k >= pool:
                    k = pool - 1
                # contention indices are 0..p_c-1; a draw beyond them lands on
                # reallocation rank k - p_c, whose preamble id is again k
                pre = k
            if pre_cnt[pre] == 0:
                used[n_used] = pre
                n_used += 1
            pre_cnt[pre] += 1
            pre_dev[pre] = c
            n_intents += 1
        n_success = 0
        for ui in range(n_used):
            pre = used[ui]
            if pre_cnt[pre] == 1:
                n_success += 1
                dev = pre_dev[pre]
                if pending[dev]:
                    pending[dev] = False
                    delay_slots[crit_pos[dev]] = t + 1
                    n_pending -= 1
            pre_cnt[pre] = 0
        intents_per_slot[t] = n_intents
        success_per_slot[t] = n_success

        if activity:
            last_activity = t
        if stationary_stop and n_pending == 0 and t - last_activity >= t_min:
            end_slot = t + 1
            break

    for t in range(end_slot, max_slots):
        learned_correct[t] = cur_correct

    return (
        delay_slots,
        learned_correct,
        decided,
        learned_state,
        intents_per_slot,
        success_per_slot,
        end_slot,
        n_reverts,
    )

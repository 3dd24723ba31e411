"""Naive reference implementations used as test oracles.

These are deliberately written with different machinery than the library:
the simulator scans every neuron every cycle against a dense weight
matrix and keeps in-flight deliveries as an explicit event list; the
metric helpers use step-by-step scanning loops.  Slow and obvious beats
fast and clever here.
"""

import math

import numpy as np

CHARGE_MIN = -32768
CHARGE_MAX = 32767


class DenseSimulator:
    """Brute-force simulator: dense matrix, all neurons checked every cycle."""

    def __init__(self, net):
        self.ids = [n.id for n in net.neurons]
        self.idx = {nid: i for i, nid in enumerate(self.ids)}
        n = len(self.ids)
        self.n = n
        self.w = np.zeros((n, n), np.int64)
        for s in net.synapses:
            self.w[self.idx[s.pre], self.idx[s.post]] = s.weight
        self.thr = np.array([nr.threshold for nr in net.neurons], np.int64)
        self.delay = np.array([nr.axon_delay for nr in net.neurons], np.int64)
        self.out = self.idx[net.output]
        self.input_idx = [self.idx[i] for i in net.input_order]
        self.charge = np.zeros(n, np.int64)
        self.events = []  # (absolute_cycle, post_index, weight), one per synapse delivery
        self.cycle = 0

    def reset(self):
        self.charge[:] = 0
        self.events = []
        self.cycle = 0

    def run(self, spikes, tau):
        """One window of tau cycles; returns (z, {neuron_id: [rel_cycles]})."""
        inputs = [(self.cycle + c, self.input_idx[pos])
                  for pos, train in enumerate(spikes) for c in train]
        start = self.cycle
        z = 0
        raster = {}
        for rel in range(tau):
            c = start + rel
            delta = np.zeros(self.n, np.int64)
            remaining = []
            for ev in self.events:
                if ev[0] == c:
                    delta[ev[1]] += ev[2]
                else:
                    remaining.append(ev)
            self.events = remaining
            for ic, post in inputs:
                if ic == c:
                    delta[post] += 1
            touched = delta != 0
            self.charge = self.charge + delta
            np.clip(self.charge, CHARGE_MIN, CHARGE_MAX,
                    out=self.charge, where=touched)
            fired = self.charge > self.thr
            for i in np.nonzero(fired)[0]:
                i = int(i)
                if i == self.out:
                    z += 1
                raster.setdefault(self.ids[i], []).append(rel)
                self.charge[i] = 0
                due = c + 1 + int(self.delay[i])
                for j in np.nonzero(self.w[i])[0]:
                    self.events.append((due, int(j), int(self.w[i, j])))
            self.cycle += 1
        return z, raster


def naive_rolling(z, window):
    out = []
    for t in range(len(z)):
        if window <= 0:
            out.append(z[t])
        else:
            lo = max(0, t - window + 1)
            out.append(sum(z[lo:t + 1]))
    return out


def naive_sample_counts(y, labels):
    tp = tn = fp = fn = 0
    for p, l in zip(y, labels):
        if l == 1 and p == 1:
            tp += 1
        elif l == 0 and p == 0:
            tn += 1
        elif l == 0 and p == 1:
            fp += 1
        else:
            fn += 1
    return tp, tn, fp, fn


def naive_event_counts(y, labels):
    T = len(labels)
    tp = fn = fp = tn = 0
    t = 0
    while t < T:
        if labels[t] == 1:
            u = t
            while u < T and labels[u] == 1:
                u += 1
            if any(y[t:u]):
                tp += 1
            else:
                fn += 1
            t = u
        else:
            t += 1
    fp_mark = [False] * T
    t = 0
    while t < T:
        if y[t] == 1:
            u = t
            while u < T and y[u] == 1:
                u += 1
            if all(labels[v] == 0 for v in range(t, u)):
                fp += 1
                for v in range(t, u):
                    fp_mark[v] = True
            t = u
        else:
            t += 1
    t = 0
    while t < T:
        if labels[t] == 0:
            u = t
            while u < T and labels[u] == 0:
                u += 1
            if not any(fp_mark[t:u]):
                tn += 1
            t = u
        else:
            t += 1
    return tp, tn, fp, fn


def naive_confusion(ys, labels, mode):
    tp = tn = fp = fn = 0
    for y, lab in zip(ys, labels):
        if mode == "sample":
            a, b, c, d = naive_sample_counts(list(y), list(lab))
        else:
            a, b, c, d = naive_event_counts(list(y), list(lab))
        tp, tn, fp, fn = tp + a, tn + b, fp + c, fn + d
    return tp, tn, fp, fn


def naive_mcc(tp, tn, fp, fn):
    d = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if d == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(d)


def naive_precision(tp, fp):
    return tp / (tp + fp) if tp + fp > 0 else 0.0


def naive_recall(tp, fn):
    return tp / (tp + fn) if tp + fn > 0 else 0.0


def naive_f1(tp, fp, fn):
    p = naive_precision(tp, fp)
    r = naive_recall(tp, fn)
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def naive_roc(zs, labels, mode, bg_hours, window=0):
    """List of (theta, far, tpr) by direct re-thresholding at every theta."""
    summed = [naive_rolling(list(z), window) for z in zs]
    max_count = 0
    for w in summed:
        for v in w:
            max_count = max(max_count, v)
    points = []
    for theta in range(max_count + 1):
        ys = [[1 if v > theta else 0 for v in w] for w in summed]
        tp, tn, fp, fn = naive_confusion(ys, labels, mode)
        points.append((theta, fp / bg_hours, naive_recall(tp, fn)))
    return points


def naive_tpr_at_far(points, limit):
    for _, far, tpr in points:
        if far <= limit:
            return tpr
    return 0.0


def naive_best_mcc(zs, labels, mode, window=0):
    summed = [naive_rolling(list(z), window) for z in zs]
    max_count = 0
    for w in summed:
        for v in w:
            max_count = max(max_count, v)
    best = (0, -2.0)
    for theta in range(max_count + 1):
        ys = [[1 if v > theta else 0 for v in w] for w in summed]
        m = naive_mcc(*naive_confusion(ys, labels, mode))
        if m >= best[1]:
            best = (theta, m)
    return best


def naive_source_counts(snr, background):
    """Solve snr = S / sqrt(S + B) for S by bisection."""
    if snr == 0:
        return 0.0

    def f(s):
        return s / math.sqrt(s + background) - snr

    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = (lo + hi) / 2.0
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def naive_vote(member_bits, vote):
    n_yes = sum(member_bits)
    if vote == "any":
        return 1 if n_yes >= 1 else 0
    if vote == "majority":
        return 1 if n_yes >= 2 else 0
    return 1 if n_yes == len(member_bits) else 0


def naive_greedy_calibration(windowed, labels, thetas0, vote, far_target,
                             stride_seconds, mode):
    """Step-by-step replay of greedy threshold calibration.

    ``windowed`` is indexed [member][run] and already rolling-summed.
    Returns (thetas, far, tpr, reached).
    """
    n_members = len(windowed)
    n_runs = len(labels)
    bg_steps = sum(1 for lab in labels for v in lab if v == 0)
    hours = bg_steps * stride_seconds / 3600.0

    def score(thetas):
        ys = []
        for r in range(n_runs):
            row = []
            for t in range(len(labels[r])):
                bits = [1 if windowed[m][r][t] > thetas[m] else 0
                        for m in range(n_members)]
                row.append(naive_vote(bits, vote))
            ys.append(row)
        tp, tn, fp, fn = naive_confusion(ys, labels, mode)
        return fp / hours, naive_recall(tp, fn)

    maxes = []
    for member in windowed:
        high = 0
        for w in member:
            for v in w:
                high = max(high, int(v))
        maxes.append(high)

    thetas = list(thetas0)
    far, tpr = score(thetas)
    while far > far_target:
        best = None
        for i in range(n_members):
            if thetas[i] >= maxes[i]:
                continue
            trial = list(thetas)
            trial[i] += 1
            far_i, tpr_i = score(trial)
            key = (tpr - tpr_i, far_i, i)
            if best is None or key < best[0]:
                best = (key, trial, far_i, tpr_i)
        if best is None:
            break
        _, thetas, far, tpr = best
    return thetas, far, tpr, far <= far_target

"""Independent reference implementations used to verify the package.

Deliberately written as plain loops over risk-set tables, separate from any
vectorized code path in the package.
"""

import numpy as np


def km_survival(time, event, t, left=False):
    """Product-limit S(t) via an explicit risk-set loop."""
    s = 1.0
    for u in sorted(set(time)):
        if (u < t) or (not left and u == t):
            at_risk = sum(1 for tt in time if tt >= u)
            deaths = sum(1 for tt, ee in zip(time, event) if tt == u and ee == 1)
            if deaths:
                s *= 1.0 - deaths / at_risk
    return s


def censoring_survival(time, event, t, left=False):
    return km_survival(time, [1 - e for e in event], t, left=left)


def ipcw_weight(time, event, i, t):
    if time[i] <= t and event[i] == 1:
        return 1.0 / censoring_survival(time, event, time[i], left=True)
    if time[i] > t:
        return 1.0 / censoring_survival(time, event, t)
    return 0.0


def brier(risk_at_t, time, event, t):
    total = 0.0
    for i in range(len(time)):
        w = ipcw_weight(time, event, i, t)
        if time[i] <= t and event[i] == 1:
            total += (1.0 - risk_at_t[i]) ** 2 * w
        elif time[i] > t:
            total += risk_at_t[i] ** 2 * w
    return total / len(time)


def auc(risk_at_t, time, event, t):
    num = den = 0.0
    for i in range(len(time)):
        if not (time[i] <= t and event[i] == 1):
            continue
        w_i = ipcw_weight(time, event, i, t)
        for j in range(len(time)):
            if not time[j] > t:
                continue
            w_j = ipcw_weight(time, event, j, t)
            if risk_at_t[i] > risk_at_t[j]:
                conc = 1.0
            elif risk_at_t[i] == risk_at_t[j]:
                conc = 0.5
            else:
                conc = 0.0
            num += conc * w_i * w_j
            den += w_i * w_j
    return num / den if den > 0 else float("nan")


def trapezoid_ibs(times, values, t_max):
    """Hand trapezoid of the weighted Brier integral with w(t) = t/t_max."""
    xs = [t for t in times if t <= t_max]
    ys = [v for t, v in zip(times, values) if t <= t_max]
    if xs[-1] < t_max:
        ys.append(float(np.interp(t_max, times, values)))
        xs.append(t_max)
    total = 0.0
    for k in range(len(xs) - 1):
        total += 0.5 * (ys[k] + ys[k + 1]) * (xs[k + 1] - xs[k])
    return total / t_max


def irls_logistic(design, labels, offset, max_iter=200, tol=1e-12):
    """Newton/IRLS fit of logistic regression with a constant offset.

    ``design`` excludes the intercept column; one is appended here. Returns
    (coefficients, intercept, final mean binary cross-entropy).
    """
    X = np.column_stack([design, np.ones(len(labels))])
    beta = np.zeros(X.shape[1])
    y = np.asarray(labels, dtype=float)
    for _ in range(max_iter):
        eta = X @ beta + offset
        p = 1.0 / (1.0 + np.exp(-eta))
        grad = X.T @ (y - p)
        if np.max(np.abs(grad)) < tol * len(y):
            break
        w = np.clip(p * (1.0 - p), 1e-12, None)
        hess = X.T @ (X * w[:, None])
        beta = beta + np.linalg.solve(hess, grad)
    eta = X @ beta + offset
    loss = float(np.mean(np.maximum(eta, 0) - eta * y + np.log1p(np.exp(-np.abs(eta)))))
    return beta[:-1], beta[-1], loss

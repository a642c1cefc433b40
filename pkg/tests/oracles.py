"""Independent reference implementations used as test oracles.

Nothing here imports the package under test; each function is a slow,
loop-based restatement of the quantity it checks.
"""

import math

R_KM = 6371.0


def cosine_law_km(p1, p2):
    """Great-circle distance by the spherical law of cosines."""
    phi1, phi2 = math.radians(p1[0]), math.radians(p2[0])
    dl = math.radians(p2[1] - p1[1])
    c = math.sin(phi1) * math.sin(phi2) + math.cos(phi1) * math.cos(phi2) * math.cos(dl)
    return R_KM * math.acos(max(-1.0, min(1.0, c)))


def haversine_loop(p1, p2):
    lat1, lon1, lat2, lon2 = map(math.radians, (p1[0], p1[1], p2[0], p2[1]))
    a = (math.sin((lat2 - lat1) / 2) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2)
    return 2 * R_KM * math.asin(math.sqrt(min(1.0, a)))


def mhd_loop(preds, actuals):
    total = 0.0
    for p, a in zip(preds, actuals):
        total += haversine_loop(p, a)
    return total / len(preds)


def rmsle_loop(preds, actuals):
    total = 0.0
    for p, a in zip(preds, actuals):
        total += (math.log(p + 1) - math.log(a + 1)) ** 2
    return math.sqrt(total / len(preds))


def offsets_min_mean(A, B):
    """Best-match distance by enumerating every offset with explicit loops."""
    m, n = len(A), len(B)
    if n < m:
        return None
    best = math.inf
    for o in range(n - m + 1):
        s = 0.0
        for k in range(m):
            s += haversine_loop(A[k], B[o + k])
        best = min(best, s / m)
    return best


def aligned_mean(A, B):
    if len(B) < len(A):
        return None
    return sum(haversine_loop(a, b) for a, b in zip(A, B)) / len(A)


def suffix_points(A, d_km):
    """Shortest tail of A whose path length is at least d_km (whole A if shorter)."""
    if d_km <= 0:
        return A[-1:]
    acc = 0.0
    for i in range(len(A) - 1, 0, -1):
        acc += haversine_loop(A[i - 1], A[i])
        if acc >= d_km:
            return A[i - 1:]
    return A


def point_segment_deg(p, a, b):
    """Euclidean distance in degree space from p to the closed segment [a, b]."""
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / L2))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def weighted_mean(distances, targets, h):
    ws = [math.exp(-((d / h) ** 2)) for d in distances]
    tot = sum(ws)
    if isinstance(targets[0], (tuple, list)):
        return tuple(sum(w * t[j] for w, t in zip(ws, targets)) / tot
                     for j in range(len(targets[0])))
    return sum(w * t for w, t in zip(ws, targets)) / tot


def modified_z(values):
    xs = sorted(values)
    n = len(xs)
    med = xs[n // 2] if n % 2 else (xs[n // 2 - 1] + xs[n // 2]) / 2
    devs = sorted(abs(v - med) for v in values)
    mad = devs[n // 2] if n % 2 else (devs[n // 2 - 1] + devs[n // 2]) / 2
    return [0.6745 * abs(v - med) / mad for v in values]


def destination_point(lat, lon, bearing_deg, dist_km):
    """Point reached from (lat, lon) along a great circle."""
    phi1, l1 = math.radians(lat), math.radians(lon)
    th = math.radians(bearing_deg)
    dr = dist_km / R_KM
    phi2 = math.asin(math.sin(phi1) * math.cos(dr) + math.cos(phi1) * math.sin(dr) * math.cos(th))
    l2 = l1 + math.atan2(math.sin(th) * math.sin(dr) * math.cos(phi1),
                         math.cos(dr) - math.sin(phi1) * math.sin(phi2))
    return math.degrees(phi2), math.degrees(l2)


def lasso_cd(X, y, alpha, n_iter=5000):
    """Plain cyclic coordinate descent for 1/(2n)||y - b - Xw||^2 + alpha ||w||_1."""
    n, p = len(X), len(X[0])
    w = [0.0] * p
    ym = sum(y) / n
    xm = [sum(r[j] for r in X) / n for j in range(p)]
    Xc = [[r[j] - xm[j] for j in range(p)] for r in X]
    yc = [v - ym for v in y]
    norms = [sum(r[j] ** 2 for r in Xc) / n for j in range(p)]
    for _ in range(n_iter):
        for j in range(p):
            if norms[j] == 0:
                continue
            rho = 0.0
            for i in range(n):
                pred = sum(Xc[i][k] * w[k] for k in range(p) if k != j)
                rho += Xc[i][j] * (yc[i] - pred)
            rho /= n
            w[j] = math.copysign(max(abs(rho) - alpha, 0.0), rho) / norms[j]
    b = ym - sum(xm[j] * w[j] for j in range(p))
    return w, b

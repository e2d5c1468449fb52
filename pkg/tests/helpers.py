from holodual.dualact import Covariance2, x_from_sigma


def random_sigmas(rng, n, det_range=(1e-2, 1.0)):
    """Covariances with ``det`` in `det_range`, drawn by rejection."""
    out = []
    while len(out) < n:
        c1, c2 = rng.uniform(0.3, 2.0, 2)
        r = rng.uniform(-0.97, 0.97)
        s = Covariance2(c1, c2, r)
        if det_range[0] <= s.det <= det_range[1]:
            out.append(s)
    return out


def random_points(rng, n, det_range=(1e-2, 1.0)):
    return [x_from_sigma(s) for s in random_sigmas(rng, n, det_range)]


# criterion number -> (passed, detail); filled by test_acceptance, printed by conftest
ACCEPTANCE = {}

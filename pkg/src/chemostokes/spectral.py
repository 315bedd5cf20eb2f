"""Laplacian eigenbasis on the periodic 2-D torus.

The computational domain is the torus [0, L)^2.  Eigenfunctions of -Delta are
the real trigonometric basis

    phi_0          = 1/sqrt(A)
    phi_(j,k)      = sqrt(2/A) cos(w . x)     for canonical (j,k)
    phi_(-j,-k)    = sqrt(2/A) sin(w . x)

with w = (2 pi / L)(j,k), A = L^2, and eigenvalue lambda = |w|^2.  A signed
integer pair identifies each basis function uniquely: the canonical
half-plane (j > 0, or j == 0 and k >= 0) carries the cosines, the mirrored
pair the sines.  Eigenvalues are stored sorted ascending with lexicographic
tie-breaking on (j,k), so mode ordering is deterministic.

Nyquist rows/columns of the quadrature grid are never retained: discrete
orthonormality of the basis is then exact, and so is the Parseval identity.
"""

import numpy as np


class ConfigurationError(ValueError):
    """Invalid grid or basis configuration."""


class Grid:
    """Uniform quadrature grid on the torus [0, side)^2."""

    def __init__(self, nx=64, ny=64, side=2.0 * np.pi):
        if nx % 2 != 0 or ny % 2 != 0 or nx < 4 or ny < 4:
            raise ConfigurationError(
                "grid dimensions must be even and >= 4, got %dx%d" % (nx, ny))
        if side <= 0:
            raise ConfigurationError("side length must be positive")
        self.nx = int(nx)
        self.ny = int(ny)
        self.side = float(side)
        self.area = self.side ** 2
        self.x = np.arange(self.nx) * (self.side / self.nx)
        self.y = np.arange(self.ny) * (self.side / self.ny)

    def __repr__(self):
        return "Grid(nx=%d, ny=%d, side=%r)" % (self.nx, self.ny, self.side)


def _even_at_least(n):
    n = int(np.ceil(n))
    return n + (n % 2)


class EigenData:
    """Truncated Laplacian eigenbasis with transform index tables.

    modes[i] is the signed pair (j,k) of basis function i, lam[i] its
    eigenvalue.  Transform tables for a given evaluation grid are built
    lazily and cached per grid size.
    """

    def __init__(self, grid, K=None):
        self.grid = grid
        fmax_x = grid.nx // 2 - 1
        fmax_y = grid.ny // 2 - 1
        pairs = []
        for j in range(0, fmax_x + 1):
            for k in range(-fmax_y, fmax_y + 1):
                if j == 0 and k < 0:
                    continue  # canonical half-plane only
                if j == 0 and k == 0:
                    pairs.append((0, 0))
                else:
                    pairs.append((j, k))      # cosine
                    pairs.append((-j, -k))    # sine
        pairs = np.array(pairs, dtype=np.int64)
        scale = (2.0 * np.pi / grid.side) ** 2
        lam = scale * (pairs[:, 0] ** 2 + pairs[:, 1] ** 2).astype(float)
        # sort by eigenvalue, ties broken lexicographically on (j,k)
        order = np.lexsort((pairs[:, 1], pairs[:, 0], lam))
        pairs = pairs[order]
        lam = lam[order]
        if K is not None:
            if K < 1 or K > pairs.shape[0]:
                raise ConfigurationError(
                    "K=%d outside [1, %d] for this grid" % (K, pairs.shape[0]))
            # round up so the prefix is closed under the cos/sin pairing;
            # partners share an eigenvalue so this stops at a tie-group end
            key = {(int(j), int(k)): i for i, (j, k) in enumerate(pairs)}
            Keff = K
            while True:
                ok = True
                for j, k in pairs[:Keff]:
                    if (j, k) != (0, 0) and key[(-int(j), -int(k))] >= Keff:
                        ok = False
                        break
                if ok:
                    break
                Keff += 1
            pairs = pairs[:Keff]
            lam = lam[:Keff]
        self.modes = pairs
        self.lam = lam
        self.K = pairs.shape[0]

        # canonical wavevector and parity of each basis function
        canon = np.where((pairs[:, 0] > 0) |
                         ((pairs[:, 0] == 0) & (pairs[:, 1] >= 0)),
                         1, -1)
        self.is_cos = canon == 1
        cj = np.where(self.is_cos, pairs[:, 0], -pairs[:, 0])
        ck = np.where(self.is_cos, pairs[:, 1], -pairs[:, 1])
        kfac = 2.0 * np.pi / grid.side
        self.wx = kfac * cj.astype(float)
        self.wy = kfac * ck.astype(float)
        self.max_freq = int(max(np.abs(cj).max(), np.abs(ck).max()))

        # partner permutation (cos <-> sin of the same canonical mode);
        # the constant mode is its own partner.
        key = {(int(j), int(k)): i for i, (j, k) in enumerate(pairs)}
        partner = np.arange(self.K)
        for i, (j, k) in enumerate(pairs):
            if j == 0 and k == 0:
                continue
            partner[i] = key[(-int(j), -int(k))]
        self.partner = partner
        # d/dx maps coeff c_i to dsign_i * w_i * c_i on the partner slot
        self.dsign = np.where(self.is_cos, -1.0, 1.0)
        self._tables = {}

    # -- transform index tables -------------------------------------------

    def dealias_grid(self):
        """Grid size obeying the 3/2 zero-padding rule for the retained band."""
        m = _even_at_least(3 * (self.max_freq + 1))
        return max(m, 8)

    def exact_product_grid(self, factor=2):
        """Grid resolving products of `factor` retained fields exactly."""
        return _even_at_least(2 * factor * self.max_freq + 2)

    def _table(self, M):
        tab = self._tables.get(M)
        if tab is not None:
            return tab
        if M // 2 <= self.max_freq:
            raise ConfigurationError(
                "evaluation grid %d cannot resolve modes up to frequency %d"
                % (M, self.max_freq))
        A = self.grid.area
        half = M // 2 + 1
        cj = np.where(self.is_cos, self.modes[:, 0], -self.modes[:, 0])
        ck = np.where(self.is_cos, self.modes[:, 1], -self.modes[:, 1])
        # gather location of the canonical bin inside the rfft half-spectrum
        mirror = ck < 0
        gj = np.where(mirror, -cj, cj)
        gk = np.where(mirror, -ck, ck)
        rows = np.mod(gj, M)
        cols = gk
        flat = rows * half + cols
        const = (self.modes[:, 0] == 0) & (self.modes[:, 1] == 0)
        fac = np.where(const, np.sqrt(A), np.sqrt(2.0 * A)) / (M * M)
        # coeff_i = re_w * Re F[bin] + im_w * Im F[bin]
        re_w = np.where(self.is_cos, fac, 0.0)
        im_sign = np.where(mirror, 1.0, -1.0)
        im_w = np.where(self.is_cos, 0.0, fac * im_sign)

        # inverse scatter: coeff -> complex half-spectrum; the half-amplitude
        # of sqrt(2/A)cos(w.x) at bin (j,k) is M^2 sqrt(2/A)/2 = M^2/sqrt(2A)
        base = M * M / np.sqrt(2.0 * A)
        wfac = np.where(self.is_cos, base + 0j, (0 - 1j) * base)
        wfac = np.where(mirror, np.conj(wfac), wfac)
        wfac = np.where(const, M * M / np.sqrt(A) + 0j, wfac)
        src = np.arange(self.K)
        # duplicate bins on the k=0 column so that irfft2 sees a Hermitian
        # column (mirror row carries the conjugate weight)
        dup = (gk == 0) & ~const & (gj != 0)
        drows = np.mod(-gj[dup], M)
        dflat = drows * half + 0
        scat_flat = np.concatenate([flat, dflat])
        scat_w = np.concatenate([wfac, np.conj(wfac[dup])])
        scat_src = np.concatenate([src, src[dup]])
        tab = {
            "half": half,
            "gather_flat": flat,
            "re_w": re_w,
            "im_w": im_w,
            "scat_flat": scat_flat,
            "scat_w": scat_w,
            "scat_src": scat_src,
        }
        self._tables[M] = tab
        return tab

    # -- batched raw-array transforms --------------------------------------

    def to_values(self, coeffs, M=None):
        """Evaluate coefficient rows on an M x M grid.  coeffs: (..., K)."""
        if M is None:
            M = self.grid.nx
        tab = self._table(M)
        c = np.asarray(coeffs, dtype=float)
        single = c.ndim == 1
        c2 = c.reshape(-1, self.K)
        G = np.zeros((c2.shape[0], M * tab["half"]), dtype=complex)
        contrib = c2[:, tab["scat_src"]] * tab["scat_w"][None, :]
        np.add.at(G, (slice(None), tab["scat_flat"]), contrib)
        vals = np.fft.irfft2(G.reshape(-1, M, tab["half"]), s=(M, M))
        return vals[0] if single else vals.reshape(c.shape[:-1] + (M, M))

    def to_coeffs(self, values):
        """Project grid values onto the retained basis.  values: (..., M, M)."""
        v = np.asarray(values, dtype=float)
        single = v.ndim == 2
        M = v.shape[-1]
        if v.shape[-2] != M:
            raise ConfigurationError("value array must be square, got %r"
                                     % (v.shape,))
        tab = self._table(M)
        F = np.fft.rfft2(v.reshape(-1, M, M))
        F = F.reshape(F.shape[0], M * tab["half"])
        picked = F[:, tab["gather_flat"]]
        c = picked.real * tab["re_w"][None, :] + picked.imag * tab["im_w"][None, :]
        return c[0] if single else c.reshape(v.shape[:-2] + (self.K,))

    # -- coefficient-space derivative operators ----------------------------

    def dx(self, coeffs):
        out = np.empty_like(coeffs)
        out[..., self.partner] = self.dsign * self.wx * coeffs
        return out

    def dy(self, coeffs):
        out = np.empty_like(coeffs)
        out[..., self.partner] = self.dsign * self.wy * coeffs
        return out


def build_eigenbasis(grid, K=None):
    """Sorted torus eigenbasis; deterministic lexicographic tie-breaking."""
    return EigenData(grid, K=K)


class SpectralField:
    """Scalar field stored as real coefficients over the eigenbasis."""

    __slots__ = ("coeffs", "eigen")

    def __init__(self, coeffs, eigen):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (eigen.K,):
            raise ConfigurationError(
                "coefficient vector has length %d, basis has K=%d"
                % (coeffs.size, eigen.K))
        self.coeffs = coeffs
        self.eigen = eigen

    def values(self, M=None):
        return self.eigen.to_values(self.coeffs, M=M)

    def copy(self):
        return SpectralField(self.coeffs.copy(), self.eigen)


class VectorField:
    """Two-component field (u1, u2) over a shared eigenbasis."""

    __slots__ = ("coeffs", "eigen")

    def __init__(self, coeffs, eigen):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (2, eigen.K):
            raise ConfigurationError("vector coefficients must be (2, K)")
        self.coeffs = coeffs
        self.eigen = eigen

    @property
    def u1(self):
        return SpectralField(self.coeffs[0], self.eigen)

    @property
    def u2(self):
        return SpectralField(self.coeffs[1], self.eigen)

    def copy(self):
        return VectorField(self.coeffs.copy(), self.eigen)


def field_from_values(values, eigen):
    return SpectralField(eigen.to_coeffs(values), eigen)


def transform(field_or_values, eigen=None):
    """Round-trippable transform: grid values <-> SpectralField."""
    if isinstance(field_or_values, SpectralField):
        return field_or_values.values()
    if eigen is None:
        raise ConfigurationError("eigenbasis required to transform values")
    v = np.asarray(field_or_values, dtype=float)
    if v.shape != (eigen.grid.nx, eigen.grid.ny):
        raise ConfigurationError("value array shape %r does not match grid %r"
                                 % (v.shape, (eigen.grid.nx, eigen.grid.ny)))
    return field_from_values(v, eigen)


# -- norms ------------------------------------------------------------------

def sobolev_norm(field, s):
    """H^s_2 norm with the (1+lambda)^(s/2) weight (equivalent norm)."""
    w = (1.0 + field.eigen.lam) ** s
    return float(np.sqrt(np.sum(w * field.coeffs ** 2)))


def sobolev_norm_coeffs(coeffs, eigen, s):
    w = (1.0 + eigen.lam) ** s
    return np.sqrt(np.sum(w * np.asarray(coeffs) ** 2, axis=-1))


def h1_seminorm_sq(coeffs, eigen):
    """|grad f|_{L^2}^2 from coefficients."""
    return np.sum(eigen.lam * np.asarray(coeffs) ** 2, axis=-1)


def lp_norm(field, p):
    """Quadrature L^p norm on the transform grid (p = inf allowed)."""
    if p != np.inf and p < 1:
        raise ValueError("p must be >= 1 or inf, got %r" % (p,))
    vals = field.values()
    if p == np.inf:
        return float(np.max(np.abs(vals)))
    grid = field.eigen.grid
    cell = grid.area / (grid.nx * grid.ny)
    return float((np.sum(np.abs(vals) ** p) * cell) ** (1.0 / p))


# -- operators ---------------------------------------------------------------

def divergence_coeffs(vec_coeffs, eigen):
    return eigen.dx(vec_coeffs[0]) + eigen.dy(vec_coeffs[1])


def helmholtz_project_coeffs(vec_coeffs, eigen):
    """Leray projection: per-mode I - w w^T / |w|^2; constants unchanged."""
    wx, wy = eigen.wx, eigen.wy
    w2 = wx * wx + wy * wy
    inv = np.where(w2 > 0, 1.0 / np.where(w2 > 0, w2, 1.0), 0.0)
    dot = wx * vec_coeffs[0] + wy * vec_coeffs[1]
    out = np.empty_like(vec_coeffs)
    out[0] = vec_coeffs[0] - wx * dot * inv
    out[1] = vec_coeffs[1] - wy * dot * inv
    return out


def helmholtz_project(v):
    return VectorField(helmholtz_project_coeffs(v.coeffs, v.eigen), v.eigen)


def divergence(v):
    return SpectralField(divergence_coeffs(v.coeffs, v.eigen), v.eigen)


def gradient(field):
    e = field.eigen
    return VectorField(np.stack([e.dx(field.coeffs), e.dy(field.coeffs)]), e)


def heat_smooth(field, delta):
    """Smoothing multiplier exp(-delta * lambda_k) on coefficients."""
    if delta < 0:
        raise ValueError("smoothing scale must be >= 0")
    return SpectralField(field.coeffs * np.exp(-delta * field.eigen.lam),
                         field.eigen)


def heat_multiplier(eigen, delta):
    return np.exp(-delta * eigen.lam)


def neg_laplacian_power(field, a):
    """(-Delta)^a multiplier lambda^a.

    Zero-mode rule: annihilated for a < 0 (no colored-noise weight on the
    constant), left unchanged for a >= 0.
    """
    lam = field.eigen.lam
    safe = np.where(lam > 0, lam, 1.0)
    mult = np.where(lam > 0, safe ** a, 1.0 if a >= 0 else 0.0)
    return SpectralField(field.coeffs * mult, field.eigen)


def colored_multiplier(eigen, gamma):
    """lambda^(-gamma/2) with the zero mode annihilated."""
    lam = eigen.lam
    return np.where(lam > 0, np.where(lam > 0, lam, 1.0) ** (-gamma / 2.0), 0.0)


# -- snapshot files -----------------------------------------------------------

def save_snapshot(field, path):
    """Plain-text snapshot: header line, then one `j k coeff` line per mode."""
    e = field.eigen
    g = e.grid
    lines = ["grid %d %d %r %d ordering=lex" % (g.nx, g.ny, g.side, e.K)]
    for (j, k), c in zip(e.modes, field.coeffs):
        lines.append("%d %d %r" % (j, k, float(c)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_snapshot(path, eigen=None):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 6 or header[0] != "grid" or header[5] != "ordering=lex":
            raise ConfigurationError("malformed snapshot header in %s" % path)
        nx, ny, side, K = int(header[1]), int(header[2]), float(header[3]), int(header[4])
        if eigen is None:
            eigen = build_eigenbasis(Grid(nx, ny, side), K=K)
        elif eigen.K != K or eigen.grid.nx != nx or eigen.grid.ny != ny:
            raise ConfigurationError("snapshot %s does not match basis" % path)
        coeffs = np.zeros(K)
        index = {(int(j), int(k)): i for i, (j, k) in enumerate(eigen.modes)}
        for i, line in enumerate(fh):
            j, k, c = line.split()
            coeffs[index[(int(j), int(k))]] = float(c)
    return SpectralField(coeffs, eigen)

"""
Angular eigenanalysis at polygon vertices.

At a vertex with interior angle ``alpha``, separation of variables for the
two-phase conductivity problem leads to the angular eigenvalue problem

    -y'' = gamma^2 y   on (0, 2*pi) \\ {alpha},

with periodicity and transmission coupling at theta = 0/2*pi and
theta = alpha (value continuous, one-sided derivative scaled by the
contrast k inside the inclusion).  The admissible exponents gamma are the
nonnegative roots of

    |sin(gamma*(alpha - pi))| = lam * |sin(gamma*pi)|,
    lam = |(k + 1) / (k - 1)|,

and the eigenfunctions are piecewise trigonometric with coefficient
quadruples (A-, B-, A+, B+) spanning the nullspace of a 4x4 matrix.
The potential behaves like ``sum_j beta_j y_j(theta) r^{gamma_j}`` near the
vertex; its gradient therefore blows up like ``r^{gamma_1 - 1}`` with
``gamma_1 in (1/2, 1)`` for finite contrast.

The module also builds the singular functions ``chi(r) ytilde(theta)
r^{gamma_1 - 1}`` whose interface jumps reproduce the leading-order data of
the shape-derivative transmission problem, by solving the same 4x4 system
with an inhomogeneous right-hand side (the matrix is evaluated at
``gamma_1 - 1``, which is never a root, so the system is uniquely solvable).

Degenerate contrasts are handled explicitly: for an insulating (k = 0) or
perfectly conducting (k = infinity) inclusion the exponents are
``j*pi / (2*pi - alpha)`` with cosine resp. sine angular profiles supported
on the exterior sector only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Contrast",
    "CornerEigenfunction",
    "CornerSpectrum",
    "SingularFunction",
    "InvalidAngle",
    "ContrastUnity",
    "DegenerateEigenspace",
    "NotAnEigenvalue",
    "SingularSystem",
    "gamma_roots",
    "eigen_matrix",
    "normalized_det",
    "eigenfunction",
    "build_spectrum",
    "singular_coefficients",
    "integral_identity_check",
    "smoothstep_cutoff",
]

ANGLE_TOL = 1e-12


class InvalidAngle(ValueError):
    """Interior angle outside (0, 2*pi) or equal to pi."""


class ContrastUnity(ValueError):
    """k = 1 has no corner singularity and is rejected here."""


class DegenerateEigenspace(ValueError):
    """The eigenvalue has a two-dimensional eigenspace (rank(Y) = 2)."""


class NotAnEigenvalue(ValueError):
    """The supplied gamma does not make the coupling matrix singular."""


class SingularSystem(np.linalg.LinAlgError):
    """Inhomogeneous 4x4 system unexpectedly singular."""


@dataclass(frozen=True)
class Contrast:
    """Conductivity of the inclusion relative to the unit background.

    ``kind`` is one of ``"finite"`` (k > 0, k != 1), ``"insulating"``
    (k = 0) or ``"conducting"`` (k = infinity).  ``k1_testing`` admits the
    excluded value k = 1 for oracle tests against the homogeneous medium.
    """

    kind: str
    k: float = float("nan")
    k1_testing: bool = False

    def __post_init__(self):
        if self.kind not in ("finite", "insulating", "conducting"):
            raise ValueError(f"unknown contrast kind {self.kind!r}")
        if self.kind == "finite":
            if not np.isfinite(self.k) or self.k <= 0:
                raise ValueError("finite contrast requires k > 0")
            if abs(self.k - 1.0) <= 1e-10 and not self.k1_testing:
                raise ContrastUnity("k = 1 requires the k1_testing flag")

    @staticmethod
    def finite(k, k1_testing=False):
        return Contrast("finite", float(k), k1_testing)

    @staticmethod
    def insulating():
        return Contrast("insulating", 0.0)

    @staticmethod
    def conducting():
        return Contrast("conducting", float("inf"))

    @property
    def lam(self) -> float:
        """lam = |(k+1)/(k-1)|; equals 1 in both degenerate limits."""
        if self.kind != "finite":
            return 1.0
        return abs((self.k + 1.0) / (self.k - 1.0))

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    def sigma(self, inside):
        """Conductivity value(s) for a boolean inside-the-inclusion mask."""
        if self.kind == "insulating":
            kval = 0.0
        elif self.kind == "conducting":
            kval = float("inf")
        else:
            kval = self.k
        return np.where(inside, kval, 1.0)


def _validate_angle(alpha):
    if not (ANGLE_TOL < alpha < 2 * np.pi - ANGLE_TOL):
        raise InvalidAngle(f"alpha = {alpha} outside (0, 2*pi)")
    if abs(alpha - np.pi) <= ANGLE_TOL:
        raise InvalidAngle("alpha = pi (collinear vertex)")


def _root_function(gamma, alpha, lam):
    return np.abs(np.sin(gamma * (alpha - np.pi))) - lam * np.abs(np.sin(gamma * np.pi))


def gamma_roots(alpha, contrast, count=3):
    """First ``count`` nonnegative corner exponents in increasing order.

    The degenerate kinds use the explicit exponents j*pi/(2*pi - alpha);
    for finite contrast the roots of the defining equation are isolated by
    a sign-change scan and polished by bisection.  gamma = 0 is always the
    first entry.
    """
    _validate_angle(alpha)
    if count < 1:
        raise ValueError("count must be >= 1")
    if contrast.kind != "finite":
        return np.array([j * np.pi / (2 * np.pi - alpha) for j in range(count)])
    if abs(contrast.k - 1.0) <= 1e-10:
        raise ContrastUnity("corner exponents undefined for k = 1")

    lam = contrast.lam
    roots = [0.0]
    # Roots come in pairs per unit interval above 1; (0, m) holds 2m - 1
    # positive roots, so this bound is generous for the requested count.
    gmax = max(3.0, 0.6 * count + 1.0)
    grid = np.linspace(1e-9, gmax, 2000)
    # When lam is large the roots cluster tightly around the integers; add
    # refinement points there so the sign scan cannot jump over a pair.
    extra = []
    offsets = np.logspace(-14, -1, 40)
    for m in range(1, int(gmax) + 1):
        extra.append(m - offsets)
        extra.append(m + offsets)
    grid = np.unique(np.concatenate([grid] + extra))
    grid = grid[(grid > 0) & (grid <= gmax)]

    fvals = _root_function(grid, alpha, lam)
    for i in range(len(grid) - 1):
        if len(roots) >= count:
            break
        a, b = grid[i], grid[i + 1]
        fa, fb = fvals[i], fvals[i + 1]
        if fa == 0.0:
            if not np.isclose(a, roots[-1], atol=1e-9):
                roots.append(a)
            continue
        if fa * fb < 0.0:
            lo, hi, flo = a, b, fa
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                fm = _root_function(mid, alpha, lam)
                if fm == 0.0:
                    lo = hi = mid
                    break
                if flo * fm < 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fm
            root = 0.5 * (lo + hi)
            if not np.isclose(root, roots[-1], atol=1e-9):
                roots.append(root)
    if len(roots) < count:
        raise RuntimeError(
            f"found only {len(roots)} of {count} exponents for alpha={alpha}, k={contrast.k}"
        )
    return np.array(roots[:count])


def eigen_matrix(gamma, alpha, k):
    """4x4 coupling matrix Y(gamma, alpha) of the angular eigenproblem.

    Rows: value/flux periodicity between theta = 0 and 2*pi, then value and
    flux continuity at theta = alpha.  Columns act on (A-, B-, A+, B+).
    """
    c2 = np.cos(2 * np.pi * gamma)
    s2 = np.sin(2 * np.pi * gamma)
    ca = np.cos(gamma * alpha)
    sa = np.sin(gamma * alpha)
    return np.array(
        [
            [1.0, 0.0, -c2, -s2],
            [0.0, k, s2, -c2],
            [ca, sa, -ca, -sa],
            [-k * sa, k * ca, sa, -ca],
        ]
    )


def normalized_det(gamma, alpha, k):
    """Determinant of Y after scaling each row to unit Euclidean norm."""
    Y = eigen_matrix(gamma, alpha, k)
    norms = np.linalg.norm(Y, axis=1)
    norms[norms == 0.0] = 1.0
    return float(np.linalg.det(Y / norms[:, None]))


def _trig_product_integral(c1, c2, gamma, a, b):
    """Integral over (a, b) of y1*y2 for y = A cos(gamma t) + B sin(gamma t)."""
    A1, B1 = c1
    A2, B2 = c2
    if gamma == 0.0:
        return A1 * A2 * (b - a)
    g2 = 2.0 * gamma

    def anti(t):
        s2, cc2 = np.sin(g2 * t), np.cos(g2 * t)
        return (
            0.5 * (A1 * A2 + B1 * B2) * t
            + (A1 * A2 - B1 * B2) * s2 / (2 * g2)
            - (A1 * B2 + A2 * B1) * cc2 / (2 * g2)
        )

    return anti(b) - anti(a)


def _trig_integral(c, gamma, a, b):
    """Integral over (a, b) of A cos(gamma t) + B sin(gamma t)."""
    A, B = c
    if gamma == 0.0:
        return A * (b - a)

    def anti(t):
        return (A * np.sin(gamma * t) - B * np.cos(gamma * t)) / gamma

    return anti(b) - anti(a)


@dataclass(frozen=True)
class CornerEigenfunction:
    """Angular profile y(theta) with unit weighted norm.

    ``coeffs`` holds (A-, B-, A+, B+); the minus pair applies on the
    interior sector (0, alpha), the plus pair on (alpha, 2*pi).  For the
    degenerate contrasts the interior pair is zero and the profile lives on
    the exterior sector only.
    """

    gamma: float
    alpha: float
    contrast: Contrast
    coeffs: np.ndarray

    @property
    def A_minus(self):
        return self.coeffs[0]

    @property
    def B_minus(self):
        return self.coeffs[1]

    @property
    def A_plus(self):
        return self.coeffs[2]

    @property
    def B_plus(self):
        return self.coeffs[3]

    def __call__(self, theta, inside=None):
        theta = np.asarray(theta, dtype=float)
        if inside is None:
            inside = theta < self.alpha
        A = np.where(inside, self.coeffs[0], self.coeffs[2])
        B = np.where(inside, self.coeffs[1], self.coeffs[3])
        return A * np.cos(self.gamma * theta) + B * np.sin(self.gamma * theta)

    def dtheta(self, theta, inside=None):
        theta = np.asarray(theta, dtype=float)
        if inside is None:
            inside = theta < self.alpha
        A = np.where(inside, self.coeffs[0], self.coeffs[2])
        B = np.where(inside, self.coeffs[1], self.coeffs[3])
        g = self.gamma
        return g * (-A * np.sin(g * theta) + B * np.cos(g * theta))

    def weighted_norm_sq(self):
        w_in = 0.0 if not self.contrast.is_finite else self.contrast.k
        inner = _trig_product_integral(
            self.coeffs[:2], self.coeffs[:2], self.gamma, 0.0, self.alpha
        )
        outer = _trig_product_integral(
            self.coeffs[2:], self.coeffs[2:], self.gamma, self.alpha, 2 * np.pi
        )
        return w_in * inner + outer


def eigenfunction(alpha, contrast, j=1, gamma=None):
    """Normalized coefficient quadruple for the j-th angular eigenfunction.

    The quadruple spans the nullspace of Y(gamma_j, alpha), scaled to unit
    norm under the weighted inner product (weight k on the interior sector)
    and sign-fixed by A- >= 0 (ties broken by B- > 0).  Raises
    ``DegenerateEigenspace`` when the nullspace is two-dimensional.
    """
    _validate_angle(alpha)
    if gamma is None:
        gamma = gamma_roots(alpha, contrast, count=j + 1)[j]

    if contrast.kind != "finite":
        scale = np.sqrt(2.0 / (2 * np.pi - alpha))
        ca, sa = np.cos(gamma * alpha), np.sin(gamma * alpha)
        if contrast.kind == "insulating":
            coeffs = np.array([0.0, 0.0, scale * ca, scale * sa])
        else:
            coeffs = np.array([0.0, 0.0, -scale * sa, scale * ca])
        return CornerEigenfunction(gamma, alpha, contrast, coeffs)

    Y = eigen_matrix(gamma, alpha, contrast.k)
    norms = np.linalg.norm(Y, axis=1)
    _, svals, vt = np.linalg.svd(Y / norms[:, None])
    null_dim = int(np.sum(svals < 1e-8))
    if null_dim == 0:
        raise NotAnEigenvalue(f"gamma = {gamma} is not an eigenvalue (min sv {svals[-1]:.2e})")
    if null_dim > 1:
        raise DegenerateEigenspace(
            f"two-dimensional eigenspace at gamma = {gamma}, alpha = {alpha}"
        )
    coeffs = vt[-1]
    ef = CornerEigenfunction(gamma, alpha, contrast, coeffs)
    coeffs = coeffs / np.sqrt(ef.weighted_norm_sq())
    if coeffs[0] < 0 or (coeffs[0] == 0.0 and coeffs[1] < 0):
        coeffs = -coeffs
    return CornerEigenfunction(gamma, alpha, contrast, coeffs)


@dataclass(frozen=True)
class CornerSpectrum:
    """Exponents and leading eigenfunctions for every vertex of a polygon."""

    contrast: Contrast
    alphas: np.ndarray
    gammas: np.ndarray  # shape (n, 3): gamma_0 = 0, gamma_1, gamma_2
    y1: tuple  # CornerEigenfunction per vertex
    y2: tuple  # CornerEigenfunction or None (rank-2 degenerate case)

    def __len__(self):
        return len(self.alphas)

    def gamma1(self, i):
        return self.gammas[i, 1]

    def gamma2(self, i):
        return self.gammas[i, 2]

    def cs1(self, i):
        """(cos(gamma_1 alpha), sin(gamma_1 alpha)) at vertex i."""
        g = self.gammas[i, 1]
        return np.cos(g * self.alphas[i]), np.sin(g * self.alphas[i])


def build_spectrum(alphas, contrast) -> CornerSpectrum:
    """Solve the angular eigenproblem at every vertex angle."""
    alphas = np.asarray(alphas, dtype=float)
    gammas = np.empty((len(alphas), 3))
    y1 = []
    y2 = []
    for i, a in enumerate(alphas):
        g = gamma_roots(a, contrast, count=3)
        gammas[i] = g
        y1.append(eigenfunction(a, contrast, j=1, gamma=g[1]))
        try:
            y2.append(eigenfunction(a, contrast, j=2, gamma=g[2]))
        except DegenerateEigenspace:
            y2.append(None)
    return CornerSpectrum(contrast, alphas, gammas, tuple(y1), tuple(y2))


def smoothstep_cutoff(r, r_cut, inner_fraction=0.4):
    """Radial quintic cut-off: 1 for r <= 0.4 r_cut, 0 for r >= r_cut, C^2.

    Returns (chi, chi', chi'').
    """
    r = np.asarray(r, dtype=float)
    r0 = inner_fraction * r_cut
    width = r_cut - r0
    s = np.clip((r - r0) / width, 0.0, 1.0)
    step = 6 * s**5 - 15 * s**4 + 10 * s**3
    dstep = (30 * s**4 - 60 * s**3 + 30 * s**2) / width
    d2step = (120 * s**3 - 180 * s**2 + 60 * s) / width**2
    chi = 1.0 - step
    return chi, -dstep, -d2step


@dataclass(frozen=True)
class SingularFunction:
    """Vertex-attached singular term ``beta * chi(r) ytilde(theta) r^{gamma1-1}``.

    The coefficient quadruple already carries the forward-expansion
    coefficient ``beta1`` (the right-hand side of the 4x4 system is scaled
    by it), so the composed function reproduces the leading-order interface
    jumps of the shape-derivative data without further scaling.
    """

    vertex: int
    alpha: float
    gamma1: float
    coeffs: np.ndarray  # (A'-, B'-, A'+, B'+), beta-scaled
    r_cut: float
    beta1: float
    contrast: Contrast
    h_minus: float = 0.0
    h_plus: float = 0.0
    inner_fraction: float = field(default=0.4)

    @property
    def gamma_prime(self):
        return self.gamma1 - 1.0

    def ytilde(self, theta):
        theta = np.asarray(theta, dtype=float)
        inside = theta < self.alpha
        A = np.where(inside, self.coeffs[0], self.coeffs[2])
        B = np.where(inside, self.coeffs[1], self.coeffs[3])
        g = self.gamma_prime
        return A * np.cos(g * theta) + B * np.sin(g * theta)

    def dytilde(self, theta):
        theta = np.asarray(theta, dtype=float)
        inside = theta < self.alpha
        A = np.where(inside, self.coeffs[0], self.coeffs[2])
        B = np.where(inside, self.coeffs[1], self.coeffs[3])
        g = self.gamma_prime
        return g * (-A * np.sin(g * theta) + B * np.cos(g * theta))

    def chi(self, r):
        return smoothstep_cutoff(r, self.r_cut, self.inner_fraction)[0]

    def value(self, r, theta):
        """chi(r) * ytilde(theta) * r^{gamma1 - 1} (vanishes for r >= r_cut)."""
        r = np.asarray(r, dtype=float)
        chi = self.chi(r)
        rpow = np.where(r > 0, r, 1.0) ** self.gamma_prime
        out = chi * self.ytilde(theta) * rpow
        return np.where(r > 0, out, 0.0)

    def gradient_polar(self, r, theta):
        """(d/dr, (1/r) d/dtheta) of the composed singular function."""
        r = np.asarray(r, dtype=float)
        chi, dchi, _ = smoothstep_cutoff(r, self.r_cut, self.inner_fraction)
        g = self.gamma_prime
        safe = np.where(r > 0, r, 1.0)
        rpow = safe**g
        y = self.ytilde(theta)
        dr = (dchi * y * rpow + chi * y * g * rpow / safe)
        dth = chi * self.dytilde(theta) * rpow / safe
        return np.where(r > 0, dr, 0.0), np.where(r > 0, dth, 0.0)

    def weighted_angular_integral(self):
        """k * int_0^alpha ytilde + int_alpha^{2pi} ytilde (sigma-weighted)."""
        k = self.contrast.k if self.contrast.is_finite else 0.0
        g = self.gamma_prime
        inner = _trig_integral(self.coeffs[:2], g, 0.0, self.alpha)
        outer = _trig_integral(self.coeffs[2:], g, self.alpha, 2 * np.pi)
        return k * inner + outer

    def value_jump(self, edge, r):
        """[w_i] = w+ - w- on the given adjacent edge at distance r.

        ``edge`` is ``"after"`` for the edge leaving the vertex (theta = 0
        locally) and ``"before"`` for the edge arriving at it
        (theta = alpha).
        """
        g = self.gamma_prime
        Am, Bm, Ap, Bp = self.coeffs
        if edge == "after":
            jump_y = (Ap * np.cos(2 * np.pi * g) + Bp * np.sin(2 * np.pi * g)) - Am
        elif edge == "before":
            ca, sa = np.cos(g * self.alpha), np.sin(g * self.alpha)
            jump_y = (Ap - Am) * ca + (Bp - Bm) * sa
        else:
            raise ValueError(edge)
        r = np.asarray(r, dtype=float)
        return self.chi(r) * jump_y * np.where(r > 0, r, 1.0) ** g

    def flux_jump_coefficient(self, edge):
        """E with [D_nu w_i] = chi(r) * E * r^{gamma1 - 2} on the edge."""
        g = self.gamma_prime
        k = self.contrast.k if self.contrast.is_finite else 0.0
        Am, Bm, Ap, Bp = self.coeffs
        if edge == "after":
            # nu-derivative is -(1/r) d/dtheta, jump between theta = 2pi- and 0+
            dy_plus = g * (-Ap * np.sin(2 * np.pi * g) + Bp * np.cos(2 * np.pi * g))
            dy_minus = g * Bm
        elif edge == "before":
            ca, sa = np.cos(g * self.alpha), np.sin(g * self.alpha)
            dy_plus = g * (-Ap * sa + Bp * ca)
            dy_minus = g * (-Am * sa + Bm * ca)
            return dy_plus - k * dy_minus
        else:
            raise ValueError(edge)
        return -(dy_plus - k * dy_minus)

    def flux_jump(self, edge, r):
        r = np.asarray(r, dtype=float)
        E = self.flux_jump_coefficient(edge)
        g = self.gamma_prime
        safe = np.where(r > 0, r, 1.0)
        return self.chi(r) * E * safe ** (g - 1.0)


def singular_coefficients(i, spectrum, beta1, h_minus, h_plus, contrast, r_cut):
    """Solve the inhomogeneous 4x4 system for the singular-function profile.

    The right-hand side carries the factor ``beta1`` (leading forward
    expansion coefficient at the vertex) so the resulting jumps match the
    inhomogeneous transmission data directly.  ``h_minus``/``h_plus`` are
    the one-sided limits of h.nu on the arriving/leaving edge.
    """
    if not contrast.is_finite:
        raise ValueError("singular enrichment implemented for finite contrast only")
    alpha = spectrum.alphas[i]
    g1 = spectrum.gamma1(i)
    ef = spectrum.y1[i]
    c1, s1 = spectrum.cs1(i)
    k = contrast.k
    rhs = (
        beta1
        * (1.0 - k)
        * g1
        * np.array(
            [
                h_plus * ef.B_minus,
                h_plus * ef.A_minus,
                h_minus * (ef.A_minus * s1 - ef.B_minus * c1),
                -h_minus * (ef.A_minus * c1 + ef.B_minus * s1),
            ]
        )
    )
    Y = eigen_matrix(g1 - 1.0, alpha, k)
    cond = np.linalg.cond(Y)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularSystem(
            f"coupling matrix at gamma1 - 1 is near singular (cond = {cond:.2e})"
        )
    coeffs = np.linalg.solve(Y, rhs)
    return SingularFunction(
        vertex=i,
        alpha=alpha,
        gamma1=g1,
        coeffs=coeffs,
        r_cut=r_cut,
        beta1=beta1,
        contrast=contrast,
        h_minus=h_minus,
        h_plus=h_plus,
    )


def integral_identity_check(i, sf, spectrum):
    """Residual of the angular integral identity tying ytilde to the data.

    The second and fourth rows of the 4x4 system force

        (gamma1 - 1) * (k Int_0^alpha ytilde + Int_alpha^{2pi} ytilde)
          = beta1 (1 - k) gamma1 (h+ A1- + h- (A1- c1 + B1- s1)),

    which is the mechanism behind both the solvability of the regular part
    and the vertex-term cancellation in the trace identity.
    """
    g1 = spectrum.gamma1(i)
    ef = spectrum.y1[i]
    c1, s1 = spectrum.cs1(i)
    k = sf.contrast.k
    lhs = (g1 - 1.0) * sf.weighted_angular_integral()
    rhs = (
        sf.beta1
        * (1.0 - k)
        * g1
        * (sf.h_plus * ef.A_minus + sf.h_minus * (ef.A_minus * c1 + ef.B_minus * s1))
    )
    return abs(lhs - rhs)

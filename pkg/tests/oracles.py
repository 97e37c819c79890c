"""Brute-force dense reference assemblies used as test oracles.

Everything here is built from numpy.polynomial objects and explicit loops over
cells and faces, independent of the package's tensor kernels.
"""

from __future__ import annotations

import itertools

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss


class Lagrange1D:
    def __init__(self, k: int):
        self.nodes = leggauss(k + 1)[0]
        self.polys = []
        for j, xj in enumerate(self.nodes):
            others = np.delete(self.nodes, j)
            poly = Polynomial.fromroots(others) if others.size else Polynomial([1.0])
            self.polys.append(poly / poly(xj))
        self.dpolys = [p.deriv() for p in self.polys]
        self.p = k + 1

    def val(self, xi):
        xi = np.atleast_1d(xi)
        return np.stack([p(xi) for p in self.polys], axis=-1)

    def der(self, xi):
        xi = np.atleast_1d(xi)
        return np.stack([p(xi) for p in self.dpolys], axis=-1)


class Axis:
    """One Cartesian direction: uniform cells on [a, b] with a Lagrange basis."""

    def __init__(self, a, b, n, k, periodic):
        self.a, self.b, self.n, self.periodic = a, b, n, periodic
        self.h = (b - a) / n
        self.basis = Lagrange1D(k)
        self.p = k + 1

    def to_phys(self, c, xi):
        return self.a + self.h * (c + 0.5 * (np.asarray(xi) + 1.0))

    def nodes(self):
        return np.concatenate([self.to_phys(c, self.basis.nodes) for c in range(self.n)])


def _tensor(tables):
    """Outer product of per-axis (q_d, p_d) tables -> (prod q, prod p)."""
    out = np.ones((1, 1))
    for t in tables:
        out = np.einsum("qi,rj->qrij", out, t).reshape(out.shape[0] * t.shape[0], out.shape[1] * t.shape[1])
    return out


def _acc(A, rows, cols, local):
    """``A[rows, cols] += local`` with repeated indices accumulated."""
    np.add.at(A, (np.asarray(rows)[:, None], np.asarray(cols)[None, :]), local)


def _points(axes_pts):
    grids = np.meshgrid(*axes_pts, indexing="ij")
    return [g.ravel() for g in grids]


class DenseAssembler:
    """Dense dG matrices for ``div(s f)`` on a tensor-product mesh of any dimension."""

    def __init__(self, axes):
        self.axes = axes
        self.shape = tuple(ax.n * ax.p for ax in axes)
        self.N = int(np.prod(self.shape))

    def dofs(self, cells):
        idx = [np.arange(ax.p) + c * ax.p for ax, c in zip(self.axes, cells)]
        grids = np.meshgrid(*idx, indexing="ij")
        return np.ravel_multi_index([g.ravel() for g in grids], self.shape)

    def rule(self, d, npts):
        return leggauss(npts)

    def mass_diag(self):
        w = []
        for ax in self.axes:
            xi, wi = leggauss(ax.p + 3)
            V = ax.basis.val(xi)
            m = np.einsum("q,qi,qi->i", wi, V, V) * 0.5 * ax.h
            w.append(np.tile(m, ax.n))
        out = w[0]
        for x in w[1:]:
            out = np.multiply.outer(out, x)
        return out.ravel()

    def transport(self, speed, active, npts):
        """Matrix of ``-int f s . grad phi + sum_faces upwind(s.n f) [phi]``.

        ``speed(d, *coords)`` gives the d-th speed component at physical points;
        ``active`` lists the directions that carry flux; ``npts[d]`` is the
        number of Gauss points used along direction d.
        """
        B = np.zeros((self.N, self.N))
        rules = [leggauss(n) for n in npts]
        for cells in itertools.product(*[range(ax.n) for ax in self.axes]):
            dofs = self.dofs(cells)
            pts = [ax.to_phys(c, r[0]) for ax, c, r in zip(self.axes, cells, rules)]
            coords = _points(pts)
            W = _tensor([(r[1] * 0.5 * ax.h)[:, None] for ax, r in zip(self.axes, rules)])[:, 0]
            vals = [ax.basis.val(r[0]) for ax, r in zip(self.axes, rules)]
            Phi = _tensor(vals)
            local = np.zeros((dofs.size, dofs.size))
            for d in active:
                tabs = list(vals)
                tabs[d] = self.axes[d].basis.der(rules[d][0]) * (2.0 / self.axes[d].h)
                dPhi = _tensor(tabs)
                s = speed(d, *coords)
                local -= np.einsum("q,q,qj,qi->ij", W, s, Phi, dPhi)
            _acc(B, dofs, dofs, local)
            for d in active:
                self._face(B, cells, d, speed, rules)
        return B

    def _face(self, B, cells, d, speed, rules):
        ax = self.axes[d]
        c = cells[d]
        if c == ax.n - 1 and not ax.periodic:
            return
        right_cells = list(cells)
        right_cells[d] = (c + 1) % ax.n
        dl, dr = self.dofs(cells), self.dofs(right_cells)
        pts, wts, tl, tr = [], [], [], []
        for e, (axe, r) in enumerate(zip(self.axes, rules)):
            if e == d:
                pts.append(np.array([ax.to_phys(c, 1.0)]))
                wts.append(np.ones(1))
                tl.append(ax.basis.val(1.0))
                tr.append(ax.basis.val(-1.0))
            else:
                pts.append(axe.to_phys(cells[e], r[0]))
                wts.append(r[1] * 0.5 * axe.h)
                tl.append(axe.basis.val(r[0]))
                tr.append(axe.basis.val(r[0]))
        coords = _points(pts)
        W = _tensor([w[:, None] for w in wts])[:, 0]
        PL, PR = _tensor(tl), _tensor(tr)
        a = speed(d, *coords) * np.ones_like(W)
        ap = np.where(a > 0, a, 0.0)
        am = np.where(a < 0, a, 0.0)
        _acc(B, dl, dl, np.einsum("q,q,qj,qi->ij", W, ap, PL, PL))
        _acc(B, dl, dr, np.einsum("q,q,qj,qi->ij", W, am, PR, PL))
        _acc(B, dr, dl, -(np.einsum("q,q,qj,qi->ij", W, ap, PL, PR)))
        _acc(B, dr, dr, -(np.einsum("q,q,qj,qi->ij", W, am, PR, PR)))

    def load(self, fn, npts):
        """``(fn, phi_i)`` with ``npts[d]`` Gauss points per direction."""
        out = np.zeros(self.N)
        rules = [leggauss(n) for n in npts]
        for cells in itertools.product(*[range(ax.n) for ax in self.axes]):
            dofs = self.dofs(cells)
            pts = [ax.to_phys(c, r[0]) for ax, c, r in zip(self.axes, cells, rules)]
            W = _tensor([(r[1] * 0.5 * ax.h)[:, None] for ax, r in zip(self.axes, rules)])[:, 0]
            Phi = _tensor([ax.basis.val(r[0]) for ax, r in zip(self.axes, rules)])
            out[dofs] += Phi.T @ (W * fn(*_points(pts)))
        return out


def phase_axes(nx, nv, kx, kv, L=1.0):
    return [Axis(0.0, 1.0, nx, kx, True), Axis(0.0, 1.0, nx, kx, True),
            Axis(-L, L, nv, kv, False), Axis(-L, L, nv, kv, False)]


def eval_spatial(axes2, values, x1, x2):
    """Evaluate a nodal 2D field at physical points (vectorized per point)."""
    values = np.asarray(values).reshape(axes2[0].n * axes2[0].p, axes2[1].n * axes2[1].p)
    out = np.empty(np.broadcast(x1, x2).shape)
    X1, X2 = np.broadcast_arrays(x1, x2)
    for idx in np.ndindex(out.shape):
        vals = []
        for ax, x in zip(axes2, (X1[idx], X2[idx])):
            c = min(int((x - ax.a) / ax.h), ax.n - 1)
            xi = 2.0 * (x - ax.a) / ax.h - 2.0 * c - 1.0
            vals.append((c, ax.basis.val(xi)[0]))
        (c1, v1), (c2, v2) = vals
        block = values[c1 * axes2[0].p:(c1 + 1) * axes2[0].p, c2 * axes2[1].p:(c2 + 1) * axes2[1].p]
        out[idx] = v1 @ block @ v2
    return out


# ---------------------------------------------------------------- Stokes


class StokesOracle:
    """Dense SIP / divergence / stabilization matrices from the face-by-face definitions."""

    def __init__(self, n, k, penalty=10.0):
        self.axes = [Axis(0.0, 1.0, n, k, True), Axis(0.0, 1.0, n, k, True)]
        self.asm = DenseAssembler(self.axes)
        self.N = self.asm.N
        self.h = self.axes[0].h
        self.penalty = penalty
        self.k = k
        self.nq = k + 3

    def _cell_tables(self, cells, nq):
        xi, w = leggauss(nq)
        vals = [ax.basis.val(xi) for ax in self.axes]
        ders = [ax.basis.der(xi) * 2.0 / ax.h for ax in self.axes]
        W = np.outer(w * 0.5 * self.axes[0].h, w * 0.5 * self.axes[1].h).ravel()
        Phi = _tensor(vals)
        G = [_tensor([ders[0], vals[1]]), _tensor([vals[0], ders[1]])]
        pts = _points([ax.to_phys(c, xi) for ax, c in zip(self.axes, cells)])
        return W, Phi, G, pts

    def _faces(self):
        """Yield (left dofs, right dofs, normal axis, W, trace L, trace R, dtrace L, dtrace R)."""
        xi, w = leggauss(self.nq)
        for cells in itertools.product(range(self.axes[0].n), range(self.axes[1].n)):
            for d in (0, 1):
                right = list(cells)
                right[d] = (cells[d] + 1) % self.axes[d].n
                e = 1 - d
                ax, axe = self.axes[d], self.axes[e]
                W = w * 0.5 * axe.h
                tang = axe.basis.val(xi)
                nl, nr = ax.basis.val(1.0), ax.basis.val(-1.0)
                dnl, dnr = ax.basis.der(1.0) * 2.0 / ax.h, ax.basis.der(-1.0) * 2.0 / ax.h
                if d == 0:
                    TL, TR = _tensor([nl, tang]), _tensor([nr, tang])
                    DL, DR = _tensor([dnl, tang]), _tensor([dnr, tang])
                else:
                    TL, TR = _tensor([tang, nl]), _tensor([tang, nr])
                    DL, DR = _tensor([tang, dnl]), _tensor([tang, dnr])
                yield self.asm.dofs(cells), self.asm.dofs(right), d, W, TL, TR, DL, DR

    def sip(self):
        A = np.zeros((self.N, self.N))
        for cells in itertools.product(range(self.axes[0].n), range(self.axes[1].n)):
            W, Phi, G, _ = self._cell_tables(cells, self.nq)
            dofs = self.asm.dofs(cells)
            _acc(A, dofs, dofs, sum(np.einsum("q,qi,qj->ij", W, g, g) for g in G))
        sig = self.penalty / self.h
        for dl, dr, d, W, TL, TR, DL, DR in self._faces():
            # jump [[phi]] = phi_L - phi_R (times n_L); average of normal derivative
            dofs = np.concatenate([dl, dr])
            jump = np.concatenate([TL, -TR], axis=1)
            avg = 0.5 * np.concatenate([DL, DR], axis=1)
            loc = sig * np.einsum("q,qi,qj->ij", W, jump, jump)
            loc -= np.einsum("q,qi,qj->ij", W, jump, avg)  # {grad u}[[psi]]: test i, trial j
            loc -= np.einsum("q,qi,qj->ij", W, avg, jump)
            _acc(A, dofs, dofs, loc)
        return A

    def divergence(self):
        """``b_h(u, w)``: rows w, columns (u1, u2)."""
        B = np.zeros((self.N, 2 * self.N))
        for cells in itertools.product(range(self.axes[0].n), range(self.axes[1].n)):
            W, Phi, G, _ = self._cell_tables(cells, self.nq)
            dofs = self.asm.dofs(cells)
            for comp in (0, 1):
                _acc(B, dofs, dofs + comp * self.N, -(np.einsum("q,qi,qj->ij", W, Phi, G[comp])))
        for dl, dr, d, W, TL, TR, DL, DR in self._faces():
            dofs = np.concatenate([dl, dr])
            jump = np.concatenate([TL, -TR], axis=1)
            avg = 0.5 * np.concatenate([TL, TR], axis=1)
            _acc(B, dofs, dofs + d * self.N, np.einsum("q,qi,qj->ij", W, avg, jump))
        return B

    def stab(self):
        S = np.zeros((self.N, self.N))
        for dl, dr, d, W, TL, TR, DL, DR in self._faces():
            dofs = np.concatenate([dl, dr])
            jump = np.concatenate([TL, -TR], axis=1)
            _acc(S, dofs, dofs, self.h * np.einsum("q,qi,qj->ij", W, jump, jump))
        return S

    def mass(self):
        return np.diag(self.asm.mass_diag())

    def weighted_mass(self, rho_nodal):
        Mr = np.zeros((self.N, self.N))
        rho_nodal = np.asarray(rho_nodal).ravel()
        for cells in itertools.product(range(self.axes[0].n), range(self.axes[1].n)):
            W, Phi, G, _ = self._cell_tables(cells, self.nq)
            dofs = self.asm.dofs(cells)
            rq = Phi @ rho_nodal[dofs]
            _acc(Mr, dofs, dofs, np.einsum("q,q,qi,qj->ij", W, rq, Phi, Phi))
        return Mr

    def load(self, fn, nq):
        return self.asm.load(fn, [nq, nq])

    def step(self, U_prev, rho, load1, load2, dt):
        """Dense saddle solve; pressure fixed by minimum-norm least squares then mean removal."""
        N = self.N
        M = self.mass()
        Av = M / dt + self.sip() + self.weighted_mass(rho)
        B = self.divergence()
        B1, B2 = B[:, :N], B[:, N:]
        K = np.block([
            [Av, np.zeros((N, N)), B1.T],
            [np.zeros((N, N)), Av, B2.T],
            [-B1, -B2, self.stab()],
        ])
        rhs = np.concatenate([M @ U_prev[0].ravel() / dt + load1, M @ U_prev[1].ravel() / dt + load2, np.zeros(N)])
        x = np.linalg.lstsq(K, rhs, rcond=1e-13)[0]
        U = x[:2 * N].reshape(2, -1)
        P = x[2 * N:]
        P = P - np.sum(np.diag(M) * P) / np.sum(np.diag(M))
        return U, P

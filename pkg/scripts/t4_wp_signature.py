"""Exploratory: signature of the Weil-Petersson pairing on constant deformations of a flat four-torus.

At a random constant structure J the constant tangents anticommuting with J
form a real vector space closed under A -> J A. On it the bilinear form
g(A, B) = Omega(A, J B) is symmetric; this script prints its eigenvalues. It
is a data-gathering run, not a check.
"""

import argparse

import numpy as np

from kahlerlab import teichmueller as tm
from kahlerlab.backends import Torus
from kahlerlab.fields import EndoField


def anticommuting_basis(J):
    D = J.shape[0]
    vecs = []
    for i in range(D):
        for j in range(D):
            E = np.zeros((D, D))
            E[i, j] = 1.0
            vecs.append((0.5 * (E + J @ E @ J)).ravel())
    u, s, _ = np.linalg.svd(np.array(vecs).T, full_matrices=False)
    return [u[:, k].reshape(D, D) for k in range(int(np.sum(s > 1e-10)))]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()
    g = Torus(2, 2)
    for seed in range(args.seeds):
        J = tm.random_constant_structure(np.random.default_rng(seed), 2)
        basis = anticommuting_basis(J)
        Jf = EndoField.constant(g, J)
        const = [EndoField.constant(g, A) for A in basis]
        G = np.array([[tm.wp_form(Jf, A, EndoField.constant(g, J @ B.comps[..., 0, 0, 0, 0])) for B in const]
                      for A in const])
        eig = np.linalg.eigvalsh(0.5 * (G + G.T))
        print(f"seed {seed}: dimension {len(basis)}, asymmetry {np.abs(G - G.T).max():.1e}, "
              f"eigenvalues {np.array2string(eig, precision=3)}")


if __name__ == "__main__":
    main()

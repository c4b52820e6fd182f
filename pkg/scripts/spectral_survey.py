"""Power-iteration estimates of rho(I - M^{-1} A) for the 1D preconditioner.

Prints gamma_max, the bound 8 eps N / (c alpha) and the ratio
gamma_max / (eps N / (c alpha)) for each (eps, N).
"""

from blprecond.discretize import assemble_upwind_1d
from blprecond.mesh import build_shishkin_1d, partition_1d
from blprecond.precond1d import build_preconditioner_1d, verify_spectrum
from blprecond.problem import example_1d


def main() -> None:
    print("eps,N,gamma_max,bound,ratio,applicable")
    for eps in [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8]:
        for N in [128, 256, 512, 1024, 2048]:
            pr = example_1d(eps)
            mesh = build_shishkin_1d(eps, N, pr.c_lower)
            A, _ = assemble_upwind_1d(mesh, pr, eps)
            p = build_preconditioner_1d(A, partition_1d(mesh)[0])
            r = verify_spectrum(A, p, eps, N, pr.c_lower, mesh)
            print(f"{eps:g},{N},{r.gamma_max:.6e},{r.bound:.6e},{r.ratio:.4f},{r.applicable}")


if __name__ == "__main__":
    main()

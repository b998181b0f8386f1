from typing import Optional, Sequence


class Sigma2Error(Exception):
    """Base error of the toolkit; ``exit_code`` is what the CLI returns."""

    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class DomainError(Sigma2Error, ValueError):
    pass


class SymmetryError(Sigma2Error, ValueError):
    pass


class BranchError(Sigma2Error, ValueError):
    pass


class SemiconvexityError(Sigma2Error, ValueError):
    def __init__(self, lambda_min: float, K: float):
        super().__init__(
            f"semiconvexity violated: lambda_min={lambda_min:.6g} <= -K={-K:.6g}"
        )
        self.lambda_min = lambda_min
        self.K = K


class ConvexityError(Sigma2Error, ValueError):
    def __init__(self, node: Sequence[int], lambda_min: float):
        super().__init__(
            f"discrete Hessian of u + K|x|^2/2 not positive definite at node "
            f"{tuple(node)} (smallest eigenvalue {lambda_min:.6g})"
        )
        self.node = tuple(int(i) for i in node)
        self.lambda_min = lambda_min


class ConstraintError(Sigma2Error, ValueError):
    pass


class DegenerateEigenvalueError(Sigma2Error, ValueError):
    pass


class SamplingError(Sigma2Error, RuntimeError):
    pass


class SingularityError(Sigma2Error, ZeroDivisionError):
    pass


class ResolutionError(Sigma2Error, ValueError):
    pass


class FitError(Sigma2Error, ValueError):
    pass


class UnsupportedError(Sigma2Error, NotImplementedError):
    pass


class IntegrabilityError(Sigma2Error, ValueError):
    pass


class LorentzViolationError(Sigma2Error, ValueError):
    def __init__(self, node: Sequence[int], gradient_norm: float):
        super().__init__(
            f"|Df*| = {gradient_norm:.6g} >= 1 at node {tuple(node)}"
        )
        self.node = tuple(int(i) for i in node)
        self.gradient_norm = gradient_norm


class BranchLeftError(Sigma2Error, RuntimeError):
    def __init__(self, node: Sequence[int], laplacian: float, iteration: int):
        super().__init__(
            f"iterate left the positive branch at node {tuple(node)} "
            f"(discrete Laplacian {laplacian:.6g}, Newton iteration {iteration})"
        )
        self.node = tuple(int(i) for i in node)
        self.laplacian = laplacian
        self.iteration = iteration


class NonConvergenceError(Sigma2Error, RuntimeError):
    def __init__(self, residual: float, iterations: int, reason: Optional[str] = None):
        message = f"Newton did not converge after {iterations} iterations, residual {residual:.3e}"
        if reason:
            message = f"{message} ({reason})"
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class LinearSolverError(Sigma2Error, RuntimeError):
    pass


class InvariantViolation(Sigma2Error, AssertionError):
    exit_code = 2

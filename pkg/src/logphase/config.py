"""Experiment configuration: flat dotted-key text files.

One `key = value` pair per line, `#` comments, e.g.::

    domain.x0 = 0
    domain.x1 = 1
    mesh.nx = 64
    exponents.p = 2 + 0.5*min(x, 1 - x)
    exponents.mu = 0.5
    rhs.name = example_i
    rhs.eps = 0.6
    solver.seed = 1
    outputs.dir = out

Values are typed as int, then float, else verbatim string (expressions
stay strings and are compiled on use).  Parsing then re-serializing then
re-parsing reproduces the same configuration.
"""

from dataclasses import dataclass, field

from .expressions import compile_expression
from .mesh import ExponentField, Mesh, build_rect_mesh
from .energy import RhsSpec, builtin_rhs, validate_assumptions
from .solve import SolverConfig

__all__ = ["ExperimentConfig", "ConfigError", "parse_config", "parse_config_file"]


class ConfigError(ValueError):
    pass


_DEFAULTS = {
    "domain.x0": 0.0,
    "domain.x1": 1.0,
    "domain.y0": 0.0,
    "domain.y1": 1.0,
    "mesh.nx": 16,
    "mesh.ny": 16,
    "exponents.p": 2.0,
    "exponents.q": 2.0,
    "exponents.mu": 0.0,
    "rhs.name": "pure_power",
    "solver.tol_residual": 1e-9,
    "solver.tol_fiber": 1e-11,
    "solver.max_iters": 400,
    "solver.armijo_c1": 1e-4,
    "solver.armijo_backtrack": 0.5,
    "solver.seed": 0,
    "solver.preconditioner": "laplace",
    "outputs.dir": "out",
    "outputs.formats": "csv,json",
}


def _coerce(raw: str):
    raw = raw.strip()
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def _render(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


@dataclass
class ExperimentConfig:
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        merged = dict(_DEFAULTS)
        merged.update(self.entries)
        self.entries = merged

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.entries == other.entries

    def get(self, key, default=None):
        return self.entries.get(key, default)

    def serialize(self) -> str:
        lines = [f"{k} = {_render(v)}" for k, v in sorted(self.entries.items())]
        return "\n".join(lines) + "\n"

    # -- builders ----------------------------------------------------------

    def _field_fn(self, key):
        """Constant or compiled expression for a spatial coefficient."""
        v = self.entries[key]
        if isinstance(v, (int, float)):
            return float(v)
        try:
            return compile_expression(v)
        except Exception as err:
            raise ConfigError(f"{key}: bad expression {v!r}: {err}") from err

    def build_mesh(self) -> Mesh:
        nx, ny = int(self.entries["mesh.nx"]), int(self.entries["mesh.ny"])
        mask_expr = self.entries.get("domain.mask")
        mask = None
        if mask_expr not in (None, ""):
            fn = compile_expression(str(mask_expr))
            mask = lambda pts: fn(pts) > 0.0
        return build_rect_mesh(
            (self.entries["domain.x0"], self.entries["domain.x1"]),
            (self.entries["domain.y0"], self.entries["domain.y1"]),
            nx, ny, mask=mask,
        )

    def build_exponents(self, mesh: Mesh) -> ExponentField:
        try:
            return ExponentField.from_functions(
                mesh,
                self._field_fn("exponents.p"),
                self._field_fn("exponents.q"),
                self._field_fn("exponents.mu"),
            )
        except ValueError as err:
            raise ConfigError(f"exponent field invalid: {err}") from err

    def build_rhs(self, exps: ExponentField) -> RhsSpec:
        name = str(self.entries["rhs.name"])
        params = {}
        for key, value in self.entries.items():
            if key.startswith("rhs.") and key not in ("rhs.name", "rhs.source"):
                pname = key[len("rhs."):]
                if isinstance(value, str):
                    params[pname] = self._field_fn(key)
                else:
                    params[pname] = value
        if name == "example_i":
            params.setdefault("q_plus", exps.q_plus)
            params.setdefault("q_minus", exps.q_minus)
        try:
            return builtin_rhs(name, params)
        except (KeyError, ValueError) as err:
            raise ConfigError(f"rhs {name!r}: {err}") from err

    def source_fn(self):
        """x-dependent source for the fixed-right-hand-side mode."""
        expr = self.entries.get("rhs.source", "1")
        return compile_expression(str(expr))

    def solver_config(self) -> SolverConfig:
        e = self.entries
        return SolverConfig(
            tol_residual=float(e["solver.tol_residual"]),
            tol_fiber=float(e["solver.tol_fiber"]),
            max_iters=int(e["solver.max_iters"]),
            armijo_c1=float(e["solver.armijo_c1"]),
            armijo_backtrack=float(e["solver.armijo_backtrack"]),
            seed=int(e["solver.seed"]),
            preconditioner=str(e["solver.preconditioner"]),
        )

    def assumption_report(self, exps: ExponentField, rhs: RhsSpec) -> dict:
        return validate_assumptions(exps, rhs)

    @staticmethod
    def violated_assumptions(report: dict) -> list[str]:
        """Names of failed structural/growth assumptions, worst first."""
        order = ["H", "H2", "H3", "f1", "f2", "f3", "f3_prime", "f4_prime", "f5", "f6"]
        return [k for k in order if report.get(k) is False]


def parse_config(text: str) -> ExperimentConfig:
    entries = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = body.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        entries[key] = _coerce(raw)
    return ExperimentConfig(entries)


def parse_config_file(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())

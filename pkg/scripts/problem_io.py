import json
import logging
import math
import os

from scripts.critpoint import ProblemSpec
from scripts.exceptions import FieldError, LaplaceAsymError, ProblemFileError
from scripts.fields import BuiltinField, PolynomialField, ScalarField

KNOWN_KEYS = {"name", "dim", "box", "h", "sigma", "g", "p", "s", "k"}
REQUIRED_KEYS = {"dim", "box", "h", "g"}
BUILTIN_PREFIX = "builtin:"


def parse_field(value, dimension: int, label: str = "") -> ScalarField:
    """
    Build a field from its problem-file value.

    Accepted forms: a list of term lines ``"coeff a1 ... ad"``, one string of
    such lines separated by newlines or ';', or ``"builtin:<name>[*scale]"``.
    """
    if isinstance(value, list):
        if not all(isinstance(line, str) for line in value):
            raise ProblemFileError(f"Field '{label}': every term must be a string 'coeff a1 ... ad'.")
        value = "\n".join(value)
    if not isinstance(value, str):
        raise ProblemFileError(f"Field '{label}' must be a term list or a string, got {type(value).__name__}.")

    text = value.strip()
    try:
        if text.startswith(BUILTIN_PREFIX):
            name, _, scale = text[len(BUILTIN_PREFIX):].partition("*")
            return BuiltinField(name.strip(), dimension, float(scale) if scale else 1.0)
        return PolynomialField.from_text(text, dimension, name=label)
    except (FieldError, ValueError) as exc:
        raise ProblemFileError(f"Field '{label}': {exc}") from exc


def field_to_value(fld: ScalarField):
    """Inverse of parse_field for polynomial and builtin fields."""
    if isinstance(fld, PolynomialField):
        return [line for line in fld.to_text().splitlines()]
    if isinstance(fld, BuiltinField):
        suffix = "" if fld.scale == 1.0 else f"*{fld.scale!r}"
        return f"{BUILTIN_PREFIX}{fld.builtin}{suffix}"
    raise ProblemFileError(f"Field '{fld.name}' of kind {fld.kind} cannot be written to a problem file.")


def _number(raw, key: str) -> float:
    if isinstance(raw, str) and raw.strip().lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(raw, bool) or not isinstance(raw, (int, float, str)):
        raise ProblemFileError(f"Key '{key}' must be a number, got {raw!r}.")
    try:
        return float(raw)
    except ValueError as exc:
        raise ProblemFileError(f"Key '{key}' is not a number: {raw!r}.") from exc


def problem_from_dict(data: dict, default_name: str = "") -> ProblemSpec:
    """Validate a decoded problem object and build the ProblemSpec."""
    if not isinstance(data, dict):
        raise ProblemFileError("A problem file must hold a JSON object.")
    unknown = sorted(set(data) - KNOWN_KEYS)
    if unknown:
        raise ProblemFileError(f"Unknown keys {unknown}; allowed keys are {sorted(KNOWN_KEYS)}.")
    missing = sorted(REQUIRED_KEYS - set(data))
    if missing:
        raise ProblemFileError(f"Missing required keys {missing}.")

    dim = data["dim"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise ProblemFileError(f"Key 'dim' must be a positive integer, got {dim!r}.")
    box = data["box"]
    if not isinstance(box, list) or len(box) != dim or any(not isinstance(b, list) or len(b) != 2 for b in box):
        raise ProblemFileError(f"Key 'box' must list {dim} pairs [a, b].")
    box = [(_number(a, "box"), _number(b, "box")) for a, b in box]

    s = _number(data.get("s", 0), "s")
    if s > 0 and "p" not in data:
        raise ProblemFileError("Key 'p' is required when s > 0.")
    p = _number(data.get("p", "inf"), "p")
    k = data.get("k", 0)
    if isinstance(k, bool) or not isinstance(k, int):
        raise ProblemFileError(f"Key 'k' must be an integer, got {k!r}.")

    sigma = parse_field(data["sigma"], dim, "sigma") if "sigma" in data else None
    try:
        return ProblemSpec(
            box=box,
            h=parse_field(data["h"], dim, "h"),
            sigma=sigma,
            g=parse_field(data["g"], dim, "g"),
            p=p,
            s=s,
            k=k,
            name=str(data.get("name", default_name)),
        )
    except LaplaceAsymError:
        raise
    except ValueError as exc:
        raise ProblemFileError(str(exc)) from exc


def problem_to_dict(prob: ProblemSpec) -> dict:
    data = {"name": prob.name} if prob.name else {}
    data.update({
        "dim": prob.dimension,
        "box": [[a, b] for a, b in prob.box],
        "h": field_to_value(prob.h),
        "sigma": field_to_value(prob.sigma),
        "g": field_to_value(prob.g),
        "s": prob.s,
        "k": prob.k,
    })
    if prob.is_perturbed:
        data["p"] = "inf" if math.isinf(prob.p) else prob.p
    return data


class ProblemReader:
    """
    Load problem definitions from JSON files.

    Parameters:
        path (str): Problem file path.
        logger (logging.Logger, optional): Custom logger for logging.
    """

    def __init__(self, path: str, logger: logging.Logger = None):
        self.path = path
        self.logger = logger or logging.getLogger(__name__)

    def load(self) -> ProblemSpec:
        """
        Read and validate the problem file.

        Returns:
            ProblemSpec: The parsed problem.

        Raises:
            ProblemFileError: On unreadable JSON, unknown or missing keys, or malformed values.
        """
        try:
            with open(self.path) as handle:
                data = json.load(handle)
        except OSError as exc:
            self.logger.error(f"Cannot read problem file {self.path}: {exc}")
            raise ProblemFileError(f"Cannot read problem file {self.path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            self.logger.error(f"Problem file {self.path} is not valid JSON: {exc}")
            raise ProblemFileError(f"Problem file {self.path} is not valid JSON: {exc}") from exc

        default_name = os.path.splitext(os.path.basename(self.path))[0]
        try:
            prob = problem_from_dict(data, default_name)
        except ProblemFileError as exc:
            self.logger.error(f"Invalid problem file {self.path}: {exc}")
            raise
        self.logger.info(f"Loaded problem '{prob.name}' (d={prob.dimension}, s={prob.s}, p={prob.p}, k={prob.k}).")
        return prob


def read_problem(path: str, logger: logging.Logger = None) -> ProblemSpec:
    return ProblemReader(path, logger).load()


def write_problem(prob: ProblemSpec, path: str) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as handle:
        json.dump(problem_to_dict(prob), handle, indent=2)
        handle.write("\n")
    return path

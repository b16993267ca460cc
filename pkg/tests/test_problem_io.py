import json
import logging
import math
import os
import tempfile
import unittest

import numpy as np

from scripts.exceptions import ProblemFileError
from scripts.fields import BuiltinField, NumericField, PolynomialField
from scripts.problem_io import (
    ProblemReader,
    field_to_value,
    parse_field,
    problem_from_dict,
    problem_to_dict,
    read_problem,
    write_problem,
)
from scripts.suite import builtin_problems


def base_problem(**overrides):
    data = {
        "name": "shifted",
        "dim": 1,
        "box": [[-1, 1]],
        "h": ["-0.5 2", "0.1 3"],
        "sigma": "1 0; 1 1",
        "g": ["1 0"],
        "p": 1.25,
        "s": 1.0,
    }
    data.update(overrides)
    return data


class TestParseField(unittest.TestCase):
    def test_term_list_and_string_agree(self):
        a = parse_field(["-0.5 2", "0.1 3"], 1, "h")
        b = parse_field("-0.5 2; 0.1 3", 1, "h")
        x = np.linspace(-1, 1, 7)[:, None]
        np.testing.assert_array_equal(a(x), b(x))

    def test_builtin_with_scale(self):
        fld = parse_field("builtin:cos_sum*2.5", 2, "h")
        self.assertIsInstance(fld, BuiltinField)
        self.assertEqual(fld.builtin, "cos_sum")
        self.assertEqual(fld.scale, 2.5)
        self.assertEqual(field_to_value(fld), "builtin:cos_sum*2.5")
        self.assertEqual(field_to_value(BuiltinField("gaussian", 1)), "builtin:gaussian")

    def test_bad_values(self):
        with self.assertRaises(ProblemFileError):
            parse_field(3.0, 1, "g")
        with self.assertRaises(ProblemFileError):
            parse_field(["1 0", 2], 1, "g")
        with self.assertRaises(ProblemFileError):
            parse_field("builtin:nope", 1, "g")
        with self.assertRaises(ProblemFileError):
            parse_field("1 0 0", 1, "g")

    def test_numeric_field_cannot_be_written(self):
        with self.assertRaises(ProblemFileError):
            field_to_value(NumericField(lambda x: x[..., 0] ** 2, 1))


class TestProblemFromDict(unittest.TestCase):
    def test_valid_problem(self):
        prob = problem_from_dict(base_problem())
        self.assertEqual(prob.name, "shifted")
        self.assertEqual(prob.p, 1.25)
        self.assertTrue(prob.is_perturbed)
        self.assertAlmostEqual(prob.sigma(0.5), 1.5)

    def test_defaults(self):
        data = base_problem()
        for key in ("sigma", "p", "s", "name"):
            data.pop(key)
        prob = problem_from_dict(data, default_name="fallback")
        self.assertFalse(prob.is_perturbed)
        self.assertTrue(math.isinf(prob.effective_p))
        self.assertEqual(prob.k, 0)
        self.assertEqual(prob.name, "fallback")

    def test_infinite_p_string(self):
        prob = problem_from_dict(base_problem(p="inf", s=0))
        self.assertTrue(math.isinf(prob.p))

    def test_unknown_key(self):
        with self.assertRaises(ProblemFileError) as ctx:
            problem_from_dict(base_problem(eps=0.1))
        self.assertIn("eps", str(ctx.exception))

    def test_missing_keys(self):
        data = base_problem()
        data.pop("g")
        with self.assertRaises(ProblemFileError):
            problem_from_dict(data)

    def test_p_required_when_perturbed(self):
        data = base_problem()
        data.pop("p")
        with self.assertRaises(ProblemFileError):
            problem_from_dict(data)

    def test_malformed_values(self):
        for overrides in ({"dim": 0}, {"dim": True}, {"box": [[-1, 1], [0, 1]]}, {"k": 1.5},
                          {"s": "large"}, {"box": [[1, -1]]}, {"k": 3}):
            with self.assertRaises(ProblemFileError):
                problem_from_dict(base_problem(**overrides))


class TestProblemFiles(unittest.TestCase):
    def setUp(self):
        self.logger = logging.getLogger('TestLogger')
        self.logger.setLevel(logging.DEBUG)
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_round_trip_builtin_problems(self):
        x = np.array([[0.3], [-0.7]])
        for prob in builtin_problems():
            path = write_problem(prob, os.path.join(self.tmp.name, f"{prob.name}.json"))
            loaded = read_problem(path, self.logger)

            # Assertions
            self.assertEqual(problem_to_dict(loaded), problem_to_dict(prob))
            points = np.full((2, prob.dimension), 0.0) + x
            np.testing.assert_array_equal(loaded.h(points), prob.h(points))

    def test_name_defaults_to_file_stem(self):
        path = os.path.join(self.tmp.name, "unnamed.json")
        data = base_problem()
        data.pop("name")
        with open(path, "w") as handle:
            json.dump(data, handle)
        self.assertEqual(ProblemReader(path, self.logger).load().name, "unnamed")

    def test_unperturbed_file_omits_p(self):
        prob = builtin_problems()[0]
        self.assertNotIn("p", problem_to_dict(prob))

    def test_invalid_json(self):
        path = os.path.join(self.tmp.name, "broken.json")
        with open(path, "w") as handle:
            handle.write("{ not json")
        with self.assertLogs(self.logger, level="ERROR"):
            with self.assertRaises(ProblemFileError):
                read_problem(path, self.logger)

    def test_missing_file(self):
        with self.assertRaises(ProblemFileError):
            read_problem(os.path.join(self.tmp.name, "absent.json"), self.logger)

    def test_polynomial_text_is_exact(self):
        fld = PolynomialField.from_text("0.1 2; -0.08333333333333333 4", 1)
        again = parse_field(field_to_value(fld), 1)
        self.assertEqual(again.terms, fld.terms)


if __name__ == '__main__':
    unittest.main()

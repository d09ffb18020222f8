use pyo3::prelude::*;
use pyo3::types::PyDict;

use haarmoments_py::haarmoments_py;

fn with_module<F: FnOnce(Python<'_>, &Bound<'_, PyDict>)>(f: F) {
    static INIT: std::sync::Once = std::sync::Once::new();
    INIT.call_once(|| pyo3::append_to_inittab!(haarmoments_py));
    Python::attach(|py| {
        let globals = PyDict::new(py);
        globals
            .set_item("hm", py.import("haarmoments_py").unwrap())
            .unwrap();
        f(py, &globals);
    });
}

fn run(py: Python<'_>, globals: &Bound<'_, PyDict>, code: &str) {
    let code = std::ffi::CString::new(code).unwrap();
    py.run(&code, Some(globals), None)
        .unwrap_or_else(|e| panic!("{e}"));
}

#[test]
fn module_round_trips() {
    with_module(|py, g| {
        run(
            py,
            g,
            r#"
import math
from fractions import Fraction
t = dict(hm.wg_table(2, 5))
assert Fraction(int(t["[2]"][0]), int(t["[2]"][1])) == Fraction(-1, 120)
p = hm.Pencil.uniform_scalar(2, 0.0, 1.0)
assert abs(p.rho_k(5) - math.sqrt(3)) < 1e-12
assert repr(p) == "Pencil(d=2, coeff_dim=1)"
m = hm.TensorModel(10, 0, 1, p, 2)
assert m.total_dim == 10
assert m.restricted_norm() > 0
try:
    hm.hurwitz_count([0, 0, 1], 0)
    raise SystemExit("bad permutation accepted")
except ValueError:
    pass
"#,
        );
    });
}

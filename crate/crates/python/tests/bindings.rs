use pyo3::prelude::*;
use pyo3::types::PyDict;
use sbl_mimo::sbl_mimo as module;

fn with_module<F: FnOnce(Python<'_>, &Bound<'_, PyDict>)>(f: F) {
    pyo3::append_to_inittab!(module);
    Python::initialize();
    Python::attach(|py| {
        let globals = PyDict::new(py);
        globals.set_item("sbl_mimo", py.import("sbl_mimo").unwrap()).unwrap();
        f(py, &globals);
    });
}

fn eval(py: Python<'_>, globals: &Bound<'_, PyDict>, code: &str) {
    let code = std::ffi::CString::new(code).unwrap();
    py.run(&code, Some(globals), None).unwrap_or_else(|e| panic!("{e}"));
}

#[test]
fn module_round_trip() {
    with_module(|py, g| {
        eval(
            py,
            g,
            r#"
d = sbl_mimo.Dictionary.dft(16, 4, 2)
assert d.structure == "diagonal"
u = [0j] * d.num_coefficients
u[3] = 1 + 1j
z = d.apply(u)
r = sbl_mimo.run_esbl(d, z, 1e-8)
assert r.converged and abs(r.u_hat[3] - (1 + 1j)) < 1e-3
h, z, s2 = sbl_mimo.generate_trial(16, 4, 2, 0.0, seed=1)
assert len(z) == 64 and abs(s2 - 1.0) < 1e-15
try:
    sbl_mimo.Dictionary([[1, 0], [0]], [[1]])
    raise AssertionError("ragged rows accepted")
except ValueError:
    pass
try:
    sbl_mimo.run_sbl(d, z[:3], 1.0)
    raise AssertionError("short observation accepted")
except ValueError as e:
    assert "shape mismatch" in str(e)
"#,
        );
    });
}

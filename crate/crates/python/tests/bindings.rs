use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<F: FnOnce(&Bound<'_, PyModule>)>(f: F) {
    Python::attach(|py| {
        let m = pyo3::wrap_pymodule!(gridcell_py::gridcell_py)(py).into_bound(py);
        f(&m.cast_into::<PyModule>().unwrap());
    });
}

#[test]
fn coverage_functions() {
    with_module(|m| {
        let r: f64 = m.getattr("rho_min").unwrap().call1((1.6e-3,)).unwrap().extract().unwrap();
        let p: f64 = m.getattr("success_probability").unwrap().call1((r, 1.6e-3)).unwrap().extract().unwrap();
        assert!((p - 0.95).abs() < 1e-6);
        let err = m.getattr("rho_min").unwrap().call1((4e-3,)).unwrap_err();
        let infeasible = m.getattr("InfeasibleLoadError").unwrap();
        assert!(err.get_type(m.py()).is(&infeasible));
    });
}

#[test]
fn schedule_returns_columns() {
    with_module(|m| {
        let s = m.getattr("schedule").unwrap().call0().unwrap();
        let s = s.cast::<PyDict>().unwrap();
        let g: Vec<f64> = s.get_item("g").unwrap().unwrap().extract().unwrap();
        let storage: Vec<f64> = s.get_item("storage").unwrap().unwrap().extract().unwrap();
        assert_eq!((g.len(), storage.len()), (24, 25));
        let kwargs = PyDict::new(m.py());
        kwargs.set_item("overrides", vec!["mu=3"]).unwrap();
        let err = m.getattr("schedule").unwrap().call((), Some(&kwargs)).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(m.py()));
    });
}

#[test]
fn run_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    with_module(|m| {
        let files: Vec<String> =
            m.getattr("run").unwrap().call1(("schedule", dir.path())).unwrap().extract().unwrap();
        assert!(files.contains(&"schedule.csv".to_string()));
    });
    assert!(dir.path().join("schedule.csv").exists());
}

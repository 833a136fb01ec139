use _dqed::_dqed;
use pyo3::prelude::*;

fn with_module<F: FnOnce(Python<'_>, &Bound<'_, PyModule>)>(f: F) {
    pyo3::append_to_inittab!(_dqed);
    pyo3::prepare_freethreaded_python();
    Python::with_gil(|py| {
        let m = py.import_bound("_dqed").unwrap();
        f(py, &m);
    });
}

#[test]
fn module_functions_and_errors() {
    with_module(|py, m| {
        let (k, deg): (f64, usize) = m.getattr("sphere_kappa_longitudinal").unwrap().call1((2,)).unwrap().extract().unwrap();
        assert_eq!((k, deg), (2.5, 5));

        let bad = m.getattr("normalize_config").unwrap().call1(("{\"schema_version\": 1}",)).unwrap_err();
        assert!(bad.is_instance_bound(py, &m.getattr("ConfigError").unwrap().downcast_into().unwrap()));
        assert!(bad.is_instance_bound(py, &m.getattr("DqedError").unwrap().downcast_into().unwrap()));

        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.json");
        std::fs::write(
            &cfg,
            r#"{"schema_version": 1,
                "mesh": {"kind": "ball", "subdivisions": 2, "radius_m": 1e-8},
                "material": {"omega_p_rad_s": 1e16, "gamma_rad_s": 1e14},
                "modes": {"longitudinal": 3, "transverse": 3}}"#,
        )
        .unwrap();
        let report = m
            .getattr("run")
            .unwrap()
            .call1(("modes", cfg.clone(), dir.path().join("out")))
            .unwrap();
        let files: Vec<String> = report.get_item("files").unwrap().extract().unwrap();
        assert_eq!(files, ["modes.json", "kappa.csv", "metadata.json"]);

        let err = m.getattr("run").unwrap().call1(("spectra", cfg, dir.path().join("out"))).unwrap_err();
        assert!(err.is_instance_bound(py, &m.getattr("ConfigError").unwrap().downcast_into().unwrap()));
    });
}

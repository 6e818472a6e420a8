//! The CSV loaders invert the writers byte for byte, including non-finite
//! values, and reject malformed files with located errors.

use std::fs;

use rectprod_cli::csvio::{self, DigammaRow, LimitRow, RadiusRow, ScatterRow, TnlimitRow};

#[test]
fn scatter_round_trips_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scatter.csv");
    let rows = vec![
        ScatterRow { trial: 0, radius: 1.0300302275239022, angle: 0.0 },
        ScatterRow { trial: 1, radius: 1e-300, angle: std::f64::consts::TAU - 1e-12 },
        ScatterRow { trial: 2, radius: 0.1 + 0.2, angle: 3.0 },
    ];
    csvio::write_scatter(&path, &rows).unwrap();
    let first = fs::read(&path).unwrap();
    let loaded = csvio::load_scatter(&path).unwrap();
    assert_eq!(loaded, rows);
    csvio::write_scatter(&path, &loaded).unwrap();
    assert_eq!(fs::read(&path).unwrap(), first);
}

#[test]
fn limit_round_trips_non_finite_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("limit.csv");
    let rows = vec![
        LimitRow {
            x: 0.0,
            f: std::f64::consts::FRAC_1_SQRT_2,
            f_star: 0.0,
            density: f64::NAN,
            density_star: f64::NAN,
            planar: 0.0,
        },
        LimitRow {
            x: 1.0,
            f: 1.0,
            f_star: 1.0,
            density: 0.25,
            density_star: f64::INFINITY,
            planar: std::f64::consts::FRAC_2_PI,
        },
    ];
    csvio::write_limit(&path, &rows).unwrap();
    let first = fs::read(&path).unwrap();
    let loaded = csvio::load_limit(&path).unwrap();
    assert_eq!(loaded.len(), 2);
    assert!(loaded[0].density.is_nan());
    assert_eq!(loaded[1].density_star, f64::INFINITY);
    csvio::write_limit(&path, &loaded).unwrap();
    assert_eq!(fs::read(&path).unwrap(), first);
}

#[test]
fn radii_digamma_tnlimit_round_trip() {
    let dir = tempfile::tempdir().unwrap();

    let radii_path = dir.path().join("radii.csv");
    let radii = vec![
        RadiusRow { trial: 0, index: 1, radius: 0.5, source: "eigen".into() },
        RadiusRow { trial: 0, index: 2, radius: 1.5, source: "oracle".into() },
    ];
    csvio::write_radii(&radii_path, &radii).unwrap();
    assert_eq!(csvio::load_radii(&radii_path).unwrap(), radii);

    let digamma_path = dir.path().join("digamma.csv");
    let digamma = vec![DigammaRow {
        index: 1,
        mean_log_t: -1.15,
        expected_log_t: -1.1544313298031055,
        residual: 0.004431329803105,
        std_error: f64::NAN,
    }];
    csvio::write_digamma(&digamma_path, &digamma).unwrap();
    let loaded = csvio::load_digamma(&digamma_path).unwrap();
    assert_eq!(loaded[0].index, 1);
    assert!(loaded[0].std_error.is_nan());

    let tnlimit_path = dir.path().join("tnlimit.csv");
    let tnlimit = vec![TnlimitRow { x: 0.25, index: 1, replicates: 200, mean: -0.6, std: 0.9 }];
    csvio::write_tnlimit(&tnlimit_path, &tnlimit).unwrap();
    assert_eq!(csvio::load_tnlimit(&tnlimit_path).unwrap(), tnlimit);
}

#[test]
fn loaders_reject_malformed_files() {
    let dir = tempfile::tempdir().unwrap();

    let wrong_header = dir.path().join("wrong.csv");
    fs::write(&wrong_header, "a,b,c\n1,2,3\n").unwrap();
    let err = csvio::load_scatter(&wrong_header).unwrap_err().to_string();
    assert!(err.contains("expected header"), "{err}");

    let short_row = dir.path().join("short.csv");
    fs::write(&short_row, "trial,radius,angle\n1,2\n").unwrap();
    let err = csvio::load_scatter(&short_row).unwrap_err().to_string();
    assert!(err.contains("line 2"), "{err}");

    let bad_number = dir.path().join("bad.csv");
    fs::write(&bad_number, "trial,radius,angle\n1,two,3\n").unwrap();
    let err = format!("{:#}", csvio::load_scatter(&bad_number).unwrap_err());
    assert!(err.contains("line 2"), "{err}");

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    assert!(csvio::load_scatter(&empty).is_err());
}

//! End-to-end flows gluing the sampler, the eigensolver, and the empirical
//! statistics together on moderate sizes.

use rectprod_core::chain_spec::ChainSpec;
use rectprod_core::eigen::{eigenvalues, spectral_invariant_check};
use rectprod_core::empirics::{
    angle_uniformity, h_transform, ks_two_sample, PlanarSample, SampleSource,
};
use rectprod_core::rng::TrialRng;
use rectprod_core::sampler::{product_chain, sample_oracle};

fn eigen_radial_and_planar(
    spec: &ChainSpec,
    seed: u64,
) -> (rectprod_core::empirics::RadialSample, PlanarSample) {
    let product = product_chain(spec, &TrialRng::new(seed, 0)).unwrap();
    let spectrum = eigenvalues(&product).unwrap();
    let radial = h_transform(&spectrum.log_moduli, spec, SampleSource::Eigen);
    let points = radial
        .radii()
        .iter()
        .copied()
        .zip(spectrum.angles.iter().copied())
        .collect();
    (radial, PlanarSample::new(points))
}

#[test]
fn angles_spread_uniformly_for_large_square_products() {
    let spec = ChainSpec::square(400, 3, 3.0).unwrap();
    let (_, planar) = eigen_radial_and_planar(&spec, 11);
    let ks = angle_uniformity(&planar).unwrap();
    assert!(ks < 0.1, "angular KS distance {ks}");
}

#[test]
fn oracle_and_eigen_radii_agree_at_moderate_size() {
    let spec = ChainSpec::with_inner(60, 4, 90, 8.0).unwrap();
    let (eigen_radial, _) = eigen_radial_and_planar(&spec, 21);
    let oracle = sample_oracle(&spec, &TrialRng::new(22, 0)).unwrap();
    let log_moduli: Vec<f64> = oracle.log_t.iter().map(|v| v / 2.0).collect();
    let oracle_radial = h_transform(&log_moduli, &spec, SampleSource::Oracle);
    let ks = ks_two_sample(&eigen_radial, &oracle_radial).unwrap();
    assert!(ks < 0.3, "two-sample KS {ks} between routes");
}

#[test]
fn run_length_spec_drives_the_full_pipeline() {
    let json = r#"{"n": 20, "m": 5, "dims": [[20, 1], [30, 4], [20, 1]], "gamma": 5.0}"#;
    let spec: ChainSpec = serde_json::from_str(json).unwrap();
    let product = product_chain(&spec, &TrialRng::new(31, 0)).unwrap();
    let spectrum = eigenvalues(&product).unwrap();
    let report = spectral_invariant_check(&product, &spectrum);
    assert!(report.trace_residual < 1e-10, "trace residual {}", report.trace_residual);
    assert!(report.logdet_gap < 1e-8, "log-det gap {}", report.logdet_gap);

    let radial = h_transform(&spectrum.log_moduli, &spec, SampleSource::Eigen);
    assert_eq!(radial.len(), 20);
    assert!(radial.radii().iter().all(|r| r.is_finite() && *r > 0.0));
}

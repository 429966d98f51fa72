mod common;

use common::{fd_residuals, max_residual_mismatch};
use forcedflow::problems::{ProblemDefinition, VelocityForcing};

#[test]
fn manufactured_linear_forcing() {
    let p = ProblemDefinition::manufactured_sphere(1.0, 2.0, VelocityForcing::Linear(vec![1.0]));
    let worst = max_residual_mismatch(&p, 20, 0.0, 1.0, 1);
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn manufactured_half_square_forcing() {
    let p = ProblemDefinition::manufactured_sphere(1.0, 2.0, VelocityForcing::HalfSquare);
    let worst = max_residual_mismatch(&p, 20, 0.0, 1.0, 2);
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn manufactured_other_radii_and_epsilon() {
    let mut p = ProblemDefinition::manufactured_sphere(0.7, 1.5, VelocityForcing::Linear(vec![1.0]));
    p.epsilon = 0.3;
    let worst = max_residual_mismatch(&p, 20, 0.0, 2.0, 3);
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn shrinking_sphere_has_no_sources() {
    let p = ProblemDefinition::pure_mcf_sphere(1.0, 1.0);
    let worst = max_residual_mismatch(&p, 20, 0.0, 0.1, 4);
    assert!(worst < 1e-6, "{worst:e}");
    let r = fd_residuals(&p, [0.0, 0.6, 0.8], 0.0);
    assert!(r.rho1.abs() < 1e-6 && r.rho4.abs() < 1e-6, "{r:?}");
}

#[test]
fn oracle_detects_a_wrong_source() {
    // dropping the diffusion term from the PDE changes the residual by Δu
    let p = ProblemDefinition::manufactured_sphere(1.0, 2.0, VelocityForcing::Linear(vec![1.0]));
    let mut q = p.clone();
    q.diffusivity = vec![2.0];
    let x = [0.6, 0.48, 0.64].map(|c| c * p.exact.unwrap().radius(0.4));
    let a = fd_residuals(&p, x, 0.4).rho1;
    let b = q.inhomogeneities(x, 0.4).unwrap().rho1;
    let c = p.inhomogeneities(x, 0.4).unwrap().rho1;
    assert!((a - c).abs() < 1e-6);
    assert!((a - b).abs() > 1e-3, "{a} {b}");
}


use forcedflow::analysis::{run_cell, ErrorMeasure};
use forcedflow::flow_solver::{SchemeVariant, SolverConfig};
use forcedflow::problems::{ProblemDefinition, VelocityForcing};

fn final_errors(scheme: SchemeVariant, exact_start: bool) -> [f64; 5] {
    let p = ProblemDefinition::manufactured_sphere(1.0, 2.0, VelocityForcing::Linear(vec![1.0]));
    let template = SolverConfig {
        t_end: 1.0,
        scheme,
        exact_start,
        ..SolverConfig::default()
    };
    let cell = run_cell(&p, 4, 2, 0.025, &template, ErrorMeasure::Lifted);
    cell.final_errors.unwrap_or_else(|| panic!("{:?}", cell.failure))
}

// the computed starting values must not dominate the error at T
#[test]
fn cascade_matches_exact_start() {
    for scheme in [SchemeVariant::Coupled, SchemeVariant::Conservative] {
        let a = final_errors(scheme, false);
        let b = final_errors(scheme, true);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 0.2 * y, "{scheme:?}: {a:?} vs {b:?}");
        }
    }
}

use std::path::PathBuf;

use proptest::prelude::*;
use pullin_core::io::{format_potential, format_spectrum, format_trace, write_profile};
use pullin_core::*;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pullin-core-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn grid_examples() {
    let g = Grid1D::new(33).unwrap();
    assert_eq!(g.h(), 0.0625);
    assert_eq!(g.x(16), 0.0);
    assert_eq!(Grid1D::new(257).unwrap().h(), 0.0078125);
    let err = Grid1D::new(34).unwrap_err();
    assert!(err.to_string().contains("grid size must be odd"));
}

#[test]
fn initial_profiles() {
    let g = Grid1D::new(65).unwrap();
    let z = initial_profile(&InitialProfile::Zero, &g, BoundaryCondition::Clamped).unwrap();
    assert!(z.u.iter().all(|&v| v == 0.0) && z.t == 0.0);
    let b = initial_profile(&InitialProfile::Bump(-0.5), &g, BoundaryCondition::Clamped).unwrap();
    assert_eq!(b.u[32], -0.5);
    assert!(is_even(&b.u));
    let err = initial_profile(&InitialProfile::Bump(-1.2), &g, BoundaryCondition::Clamped)
        .unwrap_err();
    assert!(err.to_string().contains("initial touchdown"));
}

#[test]
fn file_profile_round_trip() {
    let g = Grid1D::new(65).unwrap();
    let u = g.sample(|x| bump(-0.4, x) * (1.0 + 0.3 * x));
    let path = scratch("u.csv");
    write_profile(&path, &g, &u).unwrap();
    let s = initial_profile(&InitialProfile::File(path.clone()), &g, BoundaryCondition::Clamped)
        .unwrap();
    assert_eq!(s.u, u);
    // A sloped end is not clamped.
    let bad = g.sample(|x| 0.1 * (1.0 - x * x));
    write_profile(&path, &g, &bad).unwrap();
    let err = initial_profile(&InitialProfile::File(path), &g, BoundaryCondition::Clamped)
        .unwrap_err();
    assert!(err.to_string().contains("incompatible initial condition"));
}

#[test]
fn dump_headers() {
    let g2 = Grid2D::new(Grid1D::new(33).unwrap(), 9).unwrap();
    let field = PotentialField::linear(&g2);
    let pot = format_potential(&field);
    assert!(pot.starts_with("x,eta,phi\n"));
    assert_eq!(pot.lines().count(), 1 + 33 * 9);
    let u = vec![0.0; 33];
    let p = DeviceParams::default();
    let tr = trace_rhs(&field, &u, &p);
    let text = format_trace(&g2.base, &tr);
    assert!(text.starts_with("x,g\n"));
    let rep = spectral_report(&g2.base, &u, &p).unwrap();
    let spec = format_spectrum(&rep);
    assert!(spec.starts_with("# bound="));
    assert_eq!(spec.lines().nth(1), Some("re,im"));
    assert_eq!(spec.lines().count(), 2 + 31);
}

proptest! {
    #[test]
    fn bumps_are_even_and_clamped(a in -0.99f64..0.99) {
        let g = Grid1D::new(65).unwrap();
        let s = initial_profile(&InitialProfile::Bump(a), &g, BoundaryCondition::Clamped).unwrap();
        prop_assert!(is_even(&s.u));
        prop_assert_eq!(s.u[0], 0.0);
        prop_assert_eq!(s.u[64], 0.0);
    }

    #[test]
    fn profile_spec_round_trip(a in -0.99f64..0.99) {
        let spec = InitialProfile::Bump(a);
        prop_assert_eq!(InitialProfile::parse(&spec.render()).unwrap(), spec);
    }

    #[test]
    fn grid_nodes_are_mirror_exact(k in 16usize..200) {
        let g = Grid1D::new(2 * k + 1).unwrap();
        let n = g.n();
        prop_assert_eq!(g.x(0), -1.0);
        prop_assert_eq!(g.x(n - 1), 1.0);
        for i in 0..n {
            prop_assert_eq!(g.x(i), -g.x(n - 1 - i));
        }
    }
}

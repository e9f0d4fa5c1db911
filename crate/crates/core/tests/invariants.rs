use nalgebra::DVector;
use primal_hybrid::bsm::{build_bsm, bsm_project, random_triangle};
use primal_hybrid::local::{assemble_local, condensed_unsymmetric, local_residual, solve_local, LocalSpace};
use primal_hybrid::mesh::{make_lshape_mesh, make_square_mesh, Mesh};
use primal_hybrid::penalty::PenaltyField;
use primal_hybrid::polybasis::tri_quadrature;
use primal_hybrid::postproc::{frobenius, jump, rate_table};
use primal_hybrid::{Point, ProblemData};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn any_mesh(n: usize, lshape: bool) -> Mesh {
    if lshape {
        make_lshape_mesh(n, 1.0 / 3.0 - 1e-3).unwrap()
    } else {
        make_square_mesh(n).unwrap()
    }
}

struct Affine(Point, f64);

impl ProblemData for Affine {
    fn load(&self, x: Point) -> Point {
        [self.0[0] + self.1 * x[1], self.0[1] - self.1 * x[0]]
    }

    fn tangential(&self, _: Point, _: Point) -> f64 {
        0.0
    }
}

/// `(d, a, b)` with `a + b <= d`.
fn monomial() -> impl Strategy<Value = (usize, usize, usize)> {
    (0usize..16).prop_flat_map(|d| (Just(d), 0..=d)).prop_flat_map(|(d, a)| (Just(d), Just(a), 0..=d - a))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mesh_topology(n in 1usize..10, lshape in any::<bool>()) {
        let m = any_mesh(n, lshape);
        let (v, e, t) = (m.vertices.len() as i64, m.edges.len() as i64, m.triangles.len() as i64);
        prop_assert_eq!(v - e + t, 1);
        let area: f64 = m.triangles.iter().map(|t| t.area).sum();
        prop_assert!((area - m.domain.area()).abs() < 1e-12);
        prop_assert!(m.triangles.iter().all(|t| t.area > 0.0));
        for ei in 0..m.edges.len() {
            if m.edges[ei].is_boundary() {
                prop_assert!(m.edge_sides(ei).is_err());
                continue;
            }
            let (kp, km, np, nm) = m.edge_sides(ei).unwrap();
            prop_assert!(kp < km);
            prop_assert!((np[0] + nm[0]).abs() < 1e-14 && (np[1] + nm[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn jump_of_equal_traces_vanishes(w in prop::array::uniform2(-5.0f64..5.0), theta in 0.0f64..6.3) {
        let n = [theta.cos(), theta.sin()];
        let j = jump(w, n, w, [-n[0], -n[1]]);
        prop_assert!(frobenius(j) < 1e-14);
    }

    #[test]
    fn jump_norm_is_trace_difference(
        wp in prop::array::uniform2(-5.0f64..5.0),
        wm in prop::array::uniform2(-5.0f64..5.0),
        theta in 0.0f64..6.3,
    ) {
        let n = [theta.cos(), theta.sin()];
        let d = ((wp[0] - wm[0]).powi(2) + (wp[1] - wm[1]).powi(2)).sqrt();
        let j = frobenius(jump(wp, n, wm, [-n[0], -n[1]]));
        prop_assert!((j - d).abs() < 1e-12 * (1.0 + d));
    }

    #[test]
    fn triangle_rule_integrates_monomials((d, a, b) in monomial()) {
        let q = tri_quadrature(d);
        let got = q.integrate(|p| p[0].powi(a as i32) * p[1].powi(b as i32));
        let want = factorial(a) * factorial(b) / factorial(a + b + 2);
        prop_assert!((got - want).abs() < 1e-13, "x^{} y^{}: {} vs {}", a, b, got, want);
    }

    #[test]
    fn rates_recover_power_law(r in 0.1f64..5.0, c in 0.01f64..100.0, len in 2usize..6) {
        let ns: Vec<usize> = (0..len).map(|i| 2usize << i).collect();
        let errs: Vec<f64> = ns.iter().map(|&n| c * (n as f64).powf(-r)).collect();
        let rates = rate_table(&ns, &errs).unwrap();
        prop_assert!(rates[0].is_none());
        for rate in rates.iter().skip(1) {
            prop_assert!((rate.unwrap() - r).abs() < 1e-10);
        }
    }

    #[test]
    fn bsm_projection_reproduces_members(seed in any::<u64>(), k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tri = random_triangle(&mut rng, 0.2);
        let space = build_bsm(k, tri).unwrap();
        let coefs = DVector::from_fn(space.dim(), |i, _| ((seed >> (i % 60)) & 7) as f64 - 3.5);
        let back = bsm_project(&space, &|x| space.eval(&coefs, x).0);
        let err = (&back - &coefs).amax();
        prop_assert!(err < 1e-8 * (1.0 + coefs.amax()), "round trip error {}", err);
    }

    #[test]
    fn local_solve_and_condensation(
        alpha in 0.0f64..10.0,
        c in prop::array::uniform2(-3.0f64..3.0),
        s in -2.0f64..2.0,
        n in 1usize..4,
        lshape in any::<bool>(),
        k in 1usize..3,
    ) {
        let mesh = any_mesh(n, lshape);
        let pen = PenaltyField::new(&mesh);
        let space = LocalSpace::new(k, None);
        let data = Affine(c, s);
        for t in [0, mesh.triangles.len() / 2, mesh.triangles.len() - 1] {
            let (mats, load) = assemble_local(&space, &mesh, t, alpha, &pen, &data);
            let resp = solve_local(t, &mats, &load).unwrap();
            prop_assert!(local_residual(&mats, &load, &resp) < 1e-9);
            let s_mat = &resp.condensed;
            prop_assert_eq!(s_mat.clone(), s_mat.transpose());
            let scale = s_mat.amax();
            let other = condensed_unsymmetric(&mats, &resp);
            prop_assert!((&other - s_mat).amax() < 1e-8 * scale);
            let min_eig = s_mat.clone().symmetric_eigenvalues().min();
            prop_assert!(min_eig > -1e-10 * scale, "min eigenvalue {}", min_eig);
            prop_assert!((&resp.condensed_load - resp.u_map.transpose() * &load).amax() < 1e-9 * (1.0 + load.amax()));
        }
    }
}

use approx::assert_relative_eq;
use nalgebra::{DMatrix, SymmetricEigen};

use fpme_core::kernels::{check_green_bounds, check_kernel_bounds, decompose_kernel};
use fpme_core::operators::{exterior_tail, laplacian_eigenvalues};
use fpme_core::{
    boundary_exponent_fit, build_dirichlet_laplacian, build_grid, build_operator, build_sfl, compute_green, Grid,
    Matrix, OperatorKind, Verdict,
};

fn dense(a: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)])
}

fn smallest_pair(a: &Matrix) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(dense(a));
    let k = eig.eigenvalues.iter().enumerate().min_by(|x, y| x.1.partial_cmp(y.1).unwrap()).unwrap().0;
    let v: Vec<f64> = eig.eigenvectors.column(k).iter().map(|x| x.abs()).collect();
    let top = v.iter().cloned().fold(0.0, f64::max);
    (eig.eigenvalues[k], v.into_iter().map(|x| x / top).collect())
}

#[test]
fn laplacian_eigenvalues_match_a_dense_eigensolver() {
    let grid = Grid::uniform(40);
    let mut closed = laplacian_eigenvalues(&grid);
    closed.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut dense_eig: Vec<f64> =
        SymmetricEigen::new(dense(&build_dirichlet_laplacian(&grid))).eigenvalues.iter().copied().collect();
    dense_eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (c, d) in closed.iter().zip(&dense_eig) {
        assert_relative_eq!(c, d, max_relative = 1e-10);
    }
    let h = grid.h;
    assert_relative_eq!(closed[0], 2.0 / (h * h) * (1.0 - (std::f64::consts::PI * h / 2.0).cos()), max_relative = 1e-12);
}

#[test]
fn first_laplacian_eigenvalue_approaches_the_continuum_value() {
    let target = (std::f64::consts::PI / 2.0).powi(2);
    let errs: Vec<f64> = [63, 127, 255].iter().map(|&n| (laplacian_eigenvalues(&Grid::uniform(n))[0] - target).abs()).collect();
    assert!(errs[2] < 1e-4);
    // second order in h
    assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5);
}

#[test]
fn quadrature_first_eigenpairs_match_a_dense_eigensolver() {
    let grid = build_grid(96).unwrap();
    for (kind, s) in [(OperatorKind::Rfl, 0.3), (OperatorKind::Cfl, 0.75), (OperatorKind::Sfl, 0.4)] {
        let op = build_operator(kind, &grid, s).unwrap();
        let (lam, phi) = smallest_pair(&op.a);
        assert_relative_eq!(op.lambda1, lam, max_relative = 1e-9);
        for (a, b) in op.phi1.iter().zip(&phi) {
            assert!((a - b).abs() < 1e-7, "{kind}: {a} vs {b}");
        }
        assert!(op.eigen_residual() < 1e-8 * op.lambda1);
    }
}

#[test]
fn spectral_eigenvalue_is_the_power_of_the_laplacian_one() {
    let grid = build_grid(64).unwrap();
    let lap = laplacian_eigenvalues(&grid)[0];
    for s in [0.1, 0.5, 0.9] {
        assert_relative_eq!(build_sfl(&grid, s).unwrap().lambda1, lap.powf(s), max_relative = 1e-14);
    }
}

#[test]
fn spectral_first_mode_is_the_cosine() {
    let grid = build_grid(255).unwrap();
    for s in [0.2, 0.7] {
        let op = build_sfl(&grid, s).unwrap();
        for (p, &x) in op.phi1.iter().zip(&grid.nodes) {
            assert!((p - (std::f64::consts::FRAC_PI_2 * x).cos()).abs() < 1e-12);
        }
    }
}

#[test]
fn operators_are_symmetric_m_matrices() {
    let grid = build_grid(64).unwrap();
    for (kind, s) in [(OperatorKind::Rfl, 0.2), (OperatorKind::Sfl, 0.5), (OperatorKind::Cfl, 0.9)] {
        let op = build_operator(kind, &grid, s).unwrap();
        assert!(op.a.asymmetry() <= 1e-12 * op.a.max_abs());
        for i in 0..grid.n {
            for j in 0..grid.n {
                if i != j {
                    assert!(op.a[(i, j)] < 0.0, "{kind} A[{i},{j}] = {}", op.a[(i, j)]);
                }
            }
        }
        assert!(op.a.row_sums().iter().all(|&r| r > 0.0));
    }
}

#[test]
fn restricted_row_sums_carry_the_exterior_tail() {
    let grid = build_grid(127).unwrap();
    let s = 0.3;
    let rfl = build_operator(OperatorKind::Rfl, &grid, s).unwrap();
    let c = fpme_core::math::fractional_constant(s);
    let tail = exterior_tail(&grid, s);
    let sums = rfl.a.row_sums();
    // the remainder is the interior quadrature of a function vanishing only at the boundary nodes
    let mid = grid.n / 2;
    assert_relative_eq!(sums[mid], c * tail[mid], max_relative = 0.05);
    assert!(sums[0] > sums[mid]);
    // at the centre both exterior half-lines are at distance 1
    assert_relative_eq!(tail[mid], 1.0 / s, max_relative = 1e-14);
}

#[test]
fn censored_zero_order_term_vanishes_in_the_interior() {
    for n in [64, 128, 256] {
        let grid = build_grid(n).unwrap();
        let op = build_operator(OperatorKind::Cfl, &grid, 0.75).unwrap();
        let b = decompose_kernel(&op).unwrap().b;
        let mid = grid.n / 2;
        assert!(b[mid] < 2.0 * grid.h * op.a[(mid, mid)].abs().sqrt(), "n = {n}: B = {}", b[mid]);
    }
}

#[test]
fn symmetric_data_give_symmetric_images() {
    let grid = build_grid(81).unwrap();
    for kind in OperatorKind::ALL {
        let s = if kind == OperatorKind::Cfl { 0.75 } else { 0.4 };
        let op = build_operator(kind, &grid, s).unwrap();
        let even: Vec<f64> = grid.nodes.iter().map(|x| 1.0 - x * x).collect();
        let odd: Vec<f64> = grid.nodes.iter().map(|x| x * (1.0 - x * x)).collect();
        let (ae, ao) = (op.apply(&even), op.apply(&odd));
        let scale = ae.iter().chain(&ao).fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..grid.n {
            let j = grid.n - 1 - i;
            assert!((ae[i] - ae[j]).abs() <= 1e-12 * scale);
            assert!((ao[i] + ao[j]).abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn green_matrix_inverts_the_operator() {
    let grid = build_grid(64).unwrap();
    for (kind, s) in [(OperatorKind::Rfl, 0.3), (OperatorKind::Sfl, 0.5)] {
        let op = build_operator(kind, &grid, s).unwrap();
        let green = compute_green(&op).unwrap();
        let back = green.apply(&op.apply(&op.phi1));
        for (a, b) in back.iter().zip(&op.phi1) {
            assert!((a - b).abs() < 1e-10);
        }
        let scaled = green.apply(&op.phi1);
        for (a, b) in scaled.iter().zip(&op.phi1) {
            assert_relative_eq!(*a, b / op.lambda1, max_relative = 1e-8);
        }
        assert!(green.g.row_sums().iter().all(|&r| r > 0.0));
        assert!((0..grid.n).all(|i| (0..grid.n).all(|j| green.g[(i, j)] > 0.0)));
    }
}

#[test]
fn quadrature_eigenfunction_exponent_for_the_censored_operator_follows_2s_minus_1() {
    // measured exponent of the discrete censored eigenfunction
    let grid = build_grid(512).unwrap();
    let op = build_operator(OperatorKind::Cfl, &grid, 0.75).unwrap();
    let fit = boundary_exponent_fit(&op.phi1, &grid, fpme_core::FitWindow::standard(&grid)).unwrap();
    assert!((fit.beta - 0.5).abs() < 0.05, "{}", fit.beta);
}

#[test]
fn kernel_reports() {
    let grid = build_grid(256).unwrap();
    let rfl = build_operator(OperatorKind::Rfl, &grid, 0.3).unwrap();
    let rep = check_kernel_bounds(&decompose_kernel(&rfl).unwrap(), &rfl);
    assert_eq!(rep[0].verdict, Verdict::Pass);
    assert!(rep[0].c_low > 0.0);

    let sfl = build_operator(OperatorKind::Sfl, &grid, 0.5).unwrap();
    let kd = decompose_kernel(&sfl).unwrap();
    let rep = check_kernel_bounds(&kd, &sfl);
    let b_rep = rep.iter().find(|r| r.name == "zero-order term B").unwrap();
    assert_eq!(b_rep.verdict, Verdict::Pass);
    assert!(b_rep.spread() < 50.0);
    // B grows like dist^{-2s}
    let b_fit = boundary_exponent_fit(&kd.b, &grid, fpme_core::FitWindow::standard(&grid)).unwrap();
    assert!((b_fit.beta + 1.0).abs() < 0.1, "{}", b_fit.beta);
    // near a common boundary point the spectral kernel degenerates
    assert!(kd.k[(0, 3)] < kd.k[(grid.n / 2, grid.n / 2 + 3)]);
    let reassembled = kd.reassemble();
    let diff = (0..grid.n).flat_map(|i| (0..grid.n).map(move |j| (i, j))).map(|(i, j)| (reassembled[(i, j)] - sfl.a[(i, j)]).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-10 * sfl.a.max_abs());

    assert_eq!(check_green_bounds(&compute_green(&sfl).unwrap(), &sfl).verdict, Verdict::Skipped);
    let small = build_operator(OperatorKind::Rfl, &build_grid(128).unwrap(), 0.3).unwrap();
    let g = check_green_bounds(&compute_green(&small).unwrap(), &small);
    assert_eq!(g.verdict, Verdict::Pass, "{g:?}");
}

#[test]
fn censored_rejects_small_s() {
    let err = build_operator(OperatorKind::Cfl, &build_grid(16).unwrap(), 0.4).unwrap_err();
    assert!(err.to_string().contains("CFL defined for 1/2 < s < 1"));
}

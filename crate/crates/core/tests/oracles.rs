use wolffkit::norms::condition_setup;
use wolffkit::verify::{check_lower_bound, check_weighted_norm, DominationPair};
use wolffkit::*;

fn pp() -> ProblemParams {
    ProblemParams::parse(3, "2", "1/2", "1", "6").unwrap()
}

fn half_space_rho(m: usize) -> CellDensityMeasure {
    CellDensityMeasure::uniform_cube(&[-0.5, -0.5, 0.5], 1.0, m, 1.0).unwrap()
}

#[test]
fn manufactured_pair_is_a_fixed_point() {
    let k = KernelSpec::green_half_space(3).unwrap();
    let rho = half_space_rho(6);
    let (sigma, ustar) = manufacture_solution(&k, &rho, 0.5, 1e-8).unwrap();
    let op = KernelGridOperator::new(&k, rho.grid(), 1e-8).unwrap();
    let Measure::Cells(s) = &sigma else { unreachable!() };
    let weighted: Vec<f64> = s.density().iter().zip(&ustar.values).map(|(d, u)| d * u.sqrt()).collect();
    let tu = op.apply(&weighted);
    for (a, b) in tu.iter().zip(&ustar.values) {
        assert!((a - b).abs() <= 1e-10 * b, "{a} vs {b}");
    }
}

#[test]
fn manufactured_q_near_zero_keeps_rho() {
    let k = KernelSpec::green_half_space(3).unwrap();
    let rho = half_space_rho(4);
    let (sigma, _) = manufacture_solution(&k, &rho, 1e-6, 1e-6).unwrap();
    let Measure::Cells(s) = &sigma else { unreachable!() };
    for d in s.density() {
        assert!((d - 1.0).abs() < 1e-5, "{d}");
    }
}

#[test]
fn manufactured_scaling() {
    let k = KernelSpec::green_half_space(3).unwrap();
    let rho = half_space_rho(4);
    let lambda: f64 = 3.0;
    let scaled = rho.with_density(vec![lambda; rho.cell_count()]).unwrap();
    let (s1, u1) = manufacture_solution(&k, &rho, 0.5, 1e-6).unwrap();
    let (s2, u2) = manufacture_solution(&k, &scaled, 0.5, 1e-6).unwrap();
    for (a, b) in u1.values.iter().zip(&u2.values) {
        assert!((lambda * a - b).abs() <= 1e-12 * b);
    }
    let (Measure::Cells(c1), Measure::Cells(c2)) = (&s1, &s2) else { unreachable!() };
    for (a, b) in c1.density().iter().zip(c2.density()) {
        assert!((lambda.powf(0.5) * a - b).abs() <= 1e-12 * b);
    }
}

#[test]
fn extension_reproduces_nodes_and_decays() {
    let sigma = Measure::Cells(CellDensityMeasure::uniform_cube(&[0.0; 3], 1.0, 4, 1.0).unwrap());
    let opts = SolverOptions { tol: 1e-10, ..Default::default() };
    let sol = solve_wolff(&sigma, &pp(), &opts).unwrap();
    let target = Target::Wolff(pp());
    let quad = QuadratureSpec::default();
    let node = &sol.u.nodes[21];
    let at_node = extend_solution(&sol.u, &sigma, &target, node, &quad, 1e-6).unwrap();
    assert!((at_node - sol.u.values[21]).abs() <= 1e-3 * at_node, "{at_node} vs {}", sol.u.values[21]);
    // far away the extension behaves like C|x|^{-(n-αp)/(p-1)} = C|x|^{-1}
    let far = |r: f64| extend_solution(&sol.u, &sigma, &target, &Point(vec![0.5, 0.5, 0.5 + r]), &quad, 1e-6).unwrap();
    let (a, b) = (far(50.0), far(100.0));
    let slope = (b / a).ln() / (100.0f64 / 50.0).ln();
    assert!((slope + 1.0).abs() < 0.02, "slope {slope}");
    let zero = Measure::Cells(CellDensityMeasure::uniform_cube(&[0.0; 3], 1.0, 2, 0.0).unwrap());
    let z = solve_wolff(&zero, &pp(), &opts).unwrap();
    assert_eq!(extend_solution(&z.u, &zero, &target, &Point(vec![3.0, 0.0, 0.0]), &quad, 1e-6).unwrap(), 0.0);
}

#[test]
fn lower_bound_on_zero_measure_has_zero_margin() {
    let k = KernelSpec::green_half_space(3).unwrap();
    let sigma = Measure::Cells(half_space_rho(2).with_density(vec![0.0; 8]).unwrap());
    let u = SampledField::constant(sigma.reference_points(), 0.0).unwrap();
    let r = check_lower_bound(&u, &sigma, &Target::Kernel { kernel: k, q: 0.5 }, &CheckOptions::default()).unwrap();
    assert!(r.passed);
    assert_eq!(r.worst_margin, 0.0);
}

#[test]
fn green_to_riesz_ratio_vanishes_at_the_boundary() {
    let k = KernelSpec::green_half_space(3).unwrap();
    let riesz = KernelSpec::riesz(3, 2.0).unwrap();
    let y = Point(vec![0.0, 0.0, 1.0]);
    let ratio = |h: f64| {
        let x = Point(vec![0.3, 0.0, h]);
        k.eval(&x, &y).unwrap() / riesz.eval(&x, &y).unwrap()
    };
    assert!(ratio(1e-3) < 1e-2 && ratio(1e-6) < 1e-5);
    assert!(ratio(1e-6) < ratio(1e-3));
}

#[test]
fn wolff_versus_havin_mazya_is_finite_on_a_box() {
    let wp = WolffParams::new(3, 1.0, 1.5).unwrap();
    let sigma = Measure::Cells(CellDensityMeasure::uniform_cube(&[0.0; 3], 1.0, 4, 1.0).unwrap());
    let grid = BoxGrid::cube(&[-1.0; 3], 3.0, 12).unwrap();
    let points: Vec<Point> = (0..20).map(|i| Point(vec![0.1 * i as f64 - 0.5, 0.5, 0.5])).collect();
    let pair = DominationPair::WolffVsHm { wp, grid };
    let r = verify::check_domination(&pair, &sigma, &points, &CheckOptions::default()).unwrap();
    let c = r.empirical_constant.unwrap();
    assert!(c.is_finite() && c > 0.0, "{c}");
}

#[test]
fn havin_mazya_is_homogeneous() {
    let wp = WolffParams::new(3, 1.0, 1.5).unwrap();
    let c = CellDensityMeasure::uniform_cube(&[0.0; 3], 1.0, 3, 1.0).unwrap();
    let scaled = c.with_density(vec![2.0; 27]).unwrap();
    let grid = BoxGrid::cube(&[-1.0; 3], 3.0, 9).unwrap();
    let x = Point(vec![0.5, 0.5, 1.5]);
    let a = havin_mazya_potential(&Measure::Cells(c), &wp, &x, &grid, 1e-6).unwrap();
    let b = havin_mazya_potential(&Measure::Cells(scaled), &wp, &x, &grid, 1e-6).unwrap();
    assert!((b / a - 2.0f64.powf(2.0)).abs() < 1e-6, "{}", b / a);
}

#[test]
fn unit_field_norm_is_a_mass_root() {
    let c = CellDensityMeasure::uniform_cube(&[0.0; 3], 2.0, 3, 0.5).unwrap();
    let mu = Measure::Cells(c);
    let one = SampledField::constant(mu.reference_points(), 1.0).unwrap();
    let r = lp_norm_dsigma(&one, 3.0, &mu).unwrap();
    assert!((r.value - mu.total_mass().powf(1.0 / 3.0)).abs() < 1e-12);
}

#[test]
fn dsigma_condition_agrees_with_norm_of_the_potential() {
    let box_ = CellDensityMeasure::uniform_cube(&[0.0; 3], 1.0, 4, 1.0).unwrap();
    let mu = Measure::Cells(box_.clone());
    let opts = ConditionOptions::default();
    let cond = condition_integral(&mu, &pp(), &ConditionKind::DsigmaWolff, &opts).unwrap();
    let (pot, e) = condition_setup(&pp(), &ConditionKind::DsigmaWolff).unwrap();
    let values = pot.on_grid(box_.grid(), box_.density(), &opts.quad, opts.tol).unwrap();
    let field = SampledField::new(mu.reference_points(), values).unwrap();
    let norm = lp_norm_dsigma(&field, e, &mu).unwrap().value;
    assert!(cond.finite);
    assert!((norm.powf(e) - cond.value).abs() < 1e-3 * cond.value, "{} vs {}", norm.powf(e), cond.value);
}

#[test]
fn box_dsigma_condition_is_stable_under_refinement() {
    let box_ = CellDensityMeasure::uniform_cube(&[0.0; 3], 1.0, 4, 1.0).unwrap();
    let r = condition_refinement(&box_, &pp(), &ConditionKind::DsigmaWolff, &ConditionOptions::default(), 3).unwrap();
    assert!(r.finite);
    let drift = wolffkit::norms::refinement_drift(&r.refinement_history).unwrap();
    assert!(drift < 0.01, "{:?}", r.refinement_history);
}

#[test]
fn weighted_norm_constants_are_finite() {
    let sigma = Measure::Cells(CellDensityMeasure::uniform_cube(&[0.0; 3], 1.0, 4, 1.0).unwrap());
    let reports = check_weighted_norm(&sigma, &pp(), 5, 1, &CheckOptions::default()).unwrap();
    assert_eq!(reports.len(), 2);
    for r in &reports {
        assert!(!r.skipped);
        let c = r.empirical_constant.unwrap();
        assert!(c.is_finite() && c > 0.0, "{}: {c}", r.name);
    }
}

#[test]
fn weighted_norm_ratios_follow_homogeneity() {
    // f has unit L^{(γ+q)/q}(dσ) norm, so under σ → λσ the dσ ratio picks up
    // λ^{γ/((γ+q)(p−1)) + 1/(γ+q)} and the dx ratio is unchanged.
    let c = CellDensityMeasure::uniform_cube(&[0.0; 3], 1.0, 4, 1.0).unwrap();
    let lambda: f64 = 2.0;
    let scaled = c.with_density(vec![lambda; 64]).unwrap();
    let a = check_weighted_norm(&Measure::Cells(c), &pp(), 5, 3, &CheckOptions::default()).unwrap();
    let b = check_weighted_norm(&Measure::Cells(scaled), &pp(), 5, 3, &CheckOptions::default()).unwrap();
    let (gamma, q, p) = (1.0, 0.5, 2.0);
    let expected = [lambda.powf(gamma / ((gamma + q) * (p - 1.0)) + 1.0 / (gamma + q)), 1.0];
    for ((x, y), e) in a.iter().zip(&b).zip(expected) {
        let (x, y) = (x.empirical_constant.unwrap(), y.empirical_constant.unwrap());
        assert!((y / x - e).abs() < 1e-6 * e, "{}: {} vs {e}", a[0].name, y / x);
    }
}

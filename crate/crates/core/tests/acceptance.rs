//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the measured numbers (run with `--nocapture` to see them).

use oipd_core::dipolar::{
    cylinder_geometry_factor, detection_volume, fluctuation_halfspace, integrate_numeric,
    mean_field_cylinder, mean_field_sphere, Geometry, IntegralKind, QuadratureOptions, SampleSpec,
};
use oipd_core::fitting::{
    fit_depth_profile, fit_exponential, propagate_uncertainty, Dataset, DepthProfileModel,
    FitModel, NuisanceWidths,
};
use oipd_core::kinetics::{
    apply_mw1, buildup_curve, polarization_buildup, relax, relaxation_experiment, simulate_oipd,
    KineticsParams, Mw1Line, Mw1Placement, ReadoutPhase, RelaxChannel, SequenceSpec,
    SublevelPopulations,
};
use oipd_core::signal::{sc_fluctuation, sc_polarization, ContrastModel};
use oipd_core::spinham::{
    build_hamiltonian, eigensystem, local_slope, transition_frequencies, Branch, TripletParams,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn check(criterion: &str, ok: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} failed: {detail}");
}

#[test]
fn c01_spectroscopy_peak_position() {
    let p = TripletParams {
        b0_gauss: 512.0,
        theta_deg: 8.0,
        phi_deg: 20.0,
        ..TripletParams::default()
    };
    let (omega_plus, _) = transition_frequencies(&p).unwrap();
    let ok = (omega_plus - 822.0).abs() <= 3.0;
    check(
        "1 (omega_plus at 512 G, 8 deg, 20 deg)",
        ok,
        &format!("omega_plus = {omega_plus:.3} MHz, target 822 +/- 3 MHz"),
    );
}

#[test]
fn c02_slopes_near_500_gauss() {
    let p = TripletParams::default().with_field(500.0);
    let plus = local_slope(&p, Branch::Plus, 0.1).unwrap();
    let minus = local_slope(&p, Branch::Minus, 0.1).unwrap();
    let ok = (plus - 2.53).abs() <= 0.02 && (minus - 2.52).abs() <= 0.02;
    check(
        "2 (transition slopes near 500 G)",
        ok,
        &format!("slope+ = {plus:.4}, slope- = {minus:.4} MHz/G, targets 2.53/2.52 +/- 0.02"),
    );
}

#[test]
fn c03_zero_field_transitions() {
    let p = TripletParams {
        b0_gauss: 0.0,
        ..TripletParams::default()
    };
    let sol = eigensystem(&build_hamiltonian(&p).unwrap()).unwrap();
    let mut lv = sol.levels.to_vec();
    lv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // analytic 3x3 diagonalization: {D+E, D-E, 0}
    let small = (lv[2] - lv[1]).abs();
    let large = (lv[2] - lv[0]).abs();
    let ok = (small - 106.80).abs() < 1e-6 && (large - 1446.30).abs() < 1e-6;
    check(
        "3 (zero-field transition magnitudes)",
        ok,
        &format!("|D-E| = {small:.8}, |D+E| = {large:.8} MHz, targets 106.80 / 1446.30"),
    );
}

#[test]
fn c04_closed_forms_vs_numeric_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC4);
    let opts = QuadratureOptions::with_rel_tol(1e-7);
    let mut worst_sphere = 0.0f64;
    let mut worst_half = 0.0f64;
    let mut worst_cyl = 0.0f64;
    for _ in 0..20 {
        let rho = rng.random_range(1e-4..1e-2);
        let p = {
            let raw: f64 = rng.random_range(-0.9..0.9);
            if raw.abs() < 0.02 {
                0.1
            } else {
                raw
            }
        };
        let c = rng.random_range(5.0..12.0);

        let sphere = SampleSpec {
            rho_per_nm3: rho,
            polarization: p,
            c_dip_g_nm3: c,
            geometry: Geometry::Sphere {
                radius_um: rng.random_range(0.5..5.0),
            },
        };
        let est = integrate_numeric(&sphere, IntegralKind::Mean, &opts).unwrap();
        let closed = mean_field_sphere(&sphere).unwrap();
        worst_sphere = worst_sphere.max((est.value - closed).abs() / closed.abs());

        let half = SampleSpec {
            rho_per_nm3: rho,
            polarization: p,
            c_dip_g_nm3: c,
            geometry: Geometry::HalfSpace {
                standoff_um: rng.random_range(0.1..50.0),
            },
        };
        let est = integrate_numeric(&half, IntegralKind::Variance, &opts).unwrap();
        let closed = fluctuation_halfspace(&half).unwrap();
        worst_half = worst_half.max((est.value - closed).abs() / closed);

        let cyl = SampleSpec {
            rho_per_nm3: rho,
            polarization: p,
            c_dip_g_nm3: c,
            geometry: Geometry::Cylinder {
                radius_um: rng.random_range(5.0..60.0),
                thickness_um: rng.random_range(2.0..40.0),
                standoff_um: rng.random_range(1.0..80.0),
            },
        };
        let est = integrate_numeric(&cyl, IntegralKind::Mean, &opts).unwrap();
        let closed = mean_field_cylinder(&cyl).unwrap();
        worst_cyl = worst_cyl.max((est.value - closed).abs() / closed.abs());
    }
    let ok = worst_sphere < 0.01 && worst_half < 0.02 && worst_cyl < 0.01;
    check(
        "4 (closed forms vs adaptive quadrature, 20 draws)",
        ok,
        &format!(
            "worst relative error: sphere {worst_sphere:.2e} (<1%), half-space {worst_half:.2e} (<2%), cylinder {worst_cyl:.2e} (<1%)"
        ),
    );
}

#[test]
fn c05_detection_volume_ratio() {
    let opts = QuadratureOptions::with_rel_tol(1e-7);
    let mut detail = String::new();
    let mut ok = true;
    for d in [0.1, 1.0, 10.0] {
        let s = SampleSpec {
            rho_per_nm3: 1.0e-3,
            polarization: 0.1,
            c_dip_g_nm3: 9.28,
            geometry: Geometry::HalfSpace { standoff_um: d },
        };
        let r_p = detection_volume(&s, IntegralKind::Mean, 0.80, &opts).unwrap();
        let r_f = detection_volume(&s, IntegralKind::Variance, 0.80, &opts).unwrap();
        let ratio = r_p / r_f;
        detail.push_str(&format!("d={d} um: r_p/r_f = {ratio:.3}; "));
        ok &= (5.0..=20.0).contains(&ratio);
    }
    check(
        "5 (detection volume ratio in [5, 20])",
        ok,
        detail.trim_end(),
    );
}

#[test]
fn c06_fluctuation_contrast_magnitude() {
    let s = SampleSpec {
        rho_per_nm3: 1.0e-3,
        polarization: 0.0,
        c_dip_g_nm3: 9.28,
        geometry: Geometry::HalfSpace { standoff_um: 10.0 },
    };
    let m = ContrastModel {
        t_total_us: 7.0,
        ..ContrastModel::default()
    };
    let sc = sc_fluctuation(fluctuation_halfspace(&s).unwrap(), &m).unwrap();
    let ok = sc >= 1.5e-10 && sc <= 6.0e-10;
    check(
        "6 (fluctuation contrast at d = 10 um)",
        ok,
        &format!("SC_fluc = {sc:.3e}, target 3e-10 within a factor of 2"),
    );
}

#[test]
fn c07_depth_profile_fit_and_nuisance_propagation() {
    let model = DepthProfileModel {
        radius_um: 35.0,
        thickness_um: 15.0,
        t_eff_us: 7.0,
        c_dip_g_nm3: 8.35,
        rho_per_nm3: 1.62e-3,
        gamma_mhz_per_g: 2.80,
    };
    let depths = [12.0, 23.0, 49.0];
    let clean: Vec<f64> = depths.iter().map(|&d| model.eval(d, &[0.10])).collect();
    let sigma: Vec<f64> = clean.iter().map(|v| 0.03 * v.abs()).collect();

    // 100 seeded trials at 3% relative noise: the fitted P must sit within
    // its own reported 1-sigma of the truth in at least 60.
    let mut hits = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xD3917 + seed);
        let y: Vec<f64> = clean
            .iter()
            .zip(&sigma)
            .map(|(&v, &s)| v + s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let data = Dataset::new(depths.to_vec(), y, Some(sigma.clone())).unwrap();
        let fit = fit_depth_profile(&data, &model).unwrap();
        if (fit.values[0] - 0.10).abs() <= fit.uncertainty(0) {
            hits += 1;
        }
    }

    // Monte Carlo nuisance propagation with the stated widths.
    let data = Dataset::new(depths.to_vec(), clean.clone(), Some(sigma.clone())).unwrap();
    let widths = NuisanceWidths {
        t_eff_us: 1.0,
        radius_um: 5.0,
        thickness_um: 3.0,
    };
    let report = propagate_uncertainty(&data, &model, &widths, 4000, 0xD3917).unwrap();
    let sigma_ok = (report.sigma_p_total - 0.01).abs() <= 0.005;

    let ok = hits >= 60 && sigma_ok;
    check(
        "7 (depth-profile fit and nuisance propagation)",
        ok,
        &format!(
            "1-sigma hits = {hits}/100 (need >= 60); sigma_P = {:.4} (target 0.01 within 50%: [0.005, 0.015])",
            report.sigma_p_total
        ),
    );
}

#[test]
fn c08_kinetics_roundtrip() {
    let s = SampleSpec {
        rho_per_nm3: 1.0e-5,
        polarization: 0.1,
        c_dip_g_nm3: 8.35,
        geometry: Geometry::Cylinder {
            radius_um: 35.0,
            thickness_um: 15.0,
            standoff_um: 49.0,
        },
    };
    let k = KineticsParams::default();
    let m = ContrastModel::default();
    let line = Mw1Line {
        center_mhz: 822.0,
        fwhm_mhz: 25.0,
    };
    let seq = SequenceSpec::oipd(21.6, 822.0);

    // noiseless relaxation experiments refit to T_plus and T_zero
    let taus: Vec<f64> = (0..14).map(|i| 2.5 * i as f64).collect();
    let mut recovered = Vec::new();
    for (channel, truth) in [
        (RelaxChannel::Plus, k.t_plus_us),
        (RelaxChannel::Zero, k.t_zero_us),
    ] {
        let pts =
            relaxation_experiment(channel, &taus, &seq, &s, &k, &m, &line, 0.0, 0).unwrap();
        let data = Dataset::new(
            pts.iter().map(|p| p.tau_rel_us).collect(),
            pts.iter().map(|p| p.amplitude).collect(),
            None,
        )
        .unwrap();
        let fit = fit_exponential(&data).unwrap();
        recovered.push((fit.value_of("decay_time").unwrap(), truth));
    }

    // buildup curve refits t_l and saturates at 4 us
    let tau_p: Vec<f64> = (0..25).map(|i| 0.25 * i as f64).collect();
    let curve = buildup_curve(&tau_p, &seq, &s, &k, &m, &line, 0.0, 0).unwrap();
    let data = Dataset::new(
        curve.iter().map(|p| p.tau_p_us).collect(),
        curve.iter().map(|p| p.amplitude).collect(),
        None,
    )
    .unwrap();
    let fit = fit_exponential(&data).unwrap();
    let t_l = fit.value_of("decay_time").unwrap();
    let p4 = polarization_buildup(4.0, &k);

    let ok = recovered.iter().all(|(got, want)| (got - want).abs() < 1e-3)
        && (t_l - 1.5).abs() < 1e-3
        && p4 >= 0.93 * k.p_sat;
    check(
        "8 (kinetics round-trip)",
        ok,
        &format!(
            "T+ = {:.6} (7), T0 = {:.6} (23), t_l = {t_l:.6} (1.5) us; P(4 us) = {p4:.4} >= 0.93 * {}",
            recovered[0].0, recovered[1].0, k.p_sat
        ),
    );
}

#[test]
fn c09_readout_phase_property() {
    let s = SampleSpec {
        rho_per_nm3: 1.0e-5,
        polarization: 0.1,
        c_dip_g_nm3: 8.35,
        geometry: Geometry::Cylinder {
            radius_um: 35.0,
            thickness_um: 15.0,
            standoff_um: 49.0,
        },
    };
    let k = KineticsParams::default();
    let m = ContrastModel::default();
    let line = Mw1Line {
        center_mhz: 822.0,
        fwhm_mhz: 25.0,
    };
    let sweep: Vec<f64> = (0..81).map(|i| 722.0 + 2.5 * i as f64).collect();
    let seq = SequenceSpec::oipd(21.6, 0.0);

    let run = |phase: ReadoutPhase| {
        oipd_core::kinetics::spectrum(
            &SequenceSpec {
                readout_phase: phase,
                ..seq
            },
            &s,
            &k,
            &m,
            &line,
            &sweep,
            0.0,
            0,
        )
        .unwrap()
    };
    let y = run(ReadoutPhase::Y);
    let x = run(ReadoutPhase::X);

    // single peak: the deviation from the baseline has one dominant extremum
    // at the resonance
    let baseline = y[0].sc;
    let dev: Vec<f64> = y.iter().map(|p| (p.sc - baseline).abs()).collect();
    let (imax, &peak) = dev
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    let single_peak = (y[imax].frequency_mhz - 822.0).abs() <= 2.6 && peak > 0.0;

    let y_peak = y.iter().map(|p| p.sc.abs()).fold(0.0f64, f64::max);
    let x_max = x.iter().map(|p| p.sc.abs()).fold(0.0f64, f64::max);
    let flat_x = x_max < 1.0e-3 * y_peak;

    check(
        "9 (readout phase property)",
        single_peak && flat_x,
        &format!(
            "y peak at {:.1} MHz (feature {:.2e}); max |x| = {x_max:.2e} < 1e-3 * {y_peak:.2e}",
            y[imax].frequency_mhz, peak
        ),
    );
}

#[test]
fn c10_property_suites() {
    // trace invariance on a 10x10x10 grid
    let base = TripletParams::default();
    let mut trace_ok = true;
    for bi in 0..10 {
        for ti in 0..10 {
            for pi in 0..10 {
                let p = TripletParams {
                    b0_gauss: 60.0 * bi as f64,
                    theta_deg: 180.0 * ti as f64 / 9.0,
                    phi_deg: 359.0 * pi as f64 / 9.0,
                    ..base
                };
                let sol = eigensystem(&build_hamiltonian(&p).unwrap()).unwrap();
                trace_ok &= (sol.levels.iter().sum::<f64>() - 2.0 * p.d_mhz).abs() < 1e-6;
            }
        }
    }

    // population conservation under a random pulse program
    let k = KineticsParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC10);
    let mut pop = SublevelPopulations::from_polarization(0.19);
    let mut pop_ok = true;
    for _ in 0..50 {
        pop = relax(&pop, rng.random_range(0.0..20.0), &k);
        pop = apply_mw1(
            &pop,
            rng.random_range(0.0..200.0),
            rng.random_range(-50.0..50.0),
            20.0,
        );
        pop_ok &= (pop.total() - 1.0).abs() < 1e-9;
    }

    // echo null for a constant field
    let s = SampleSpec {
        rho_per_nm3: 1.62e-3,
        polarization: 0.1,
        c_dip_g_nm3: 8.35,
        geometry: Geometry::Cylinder {
            radius_um: 35.0,
            thickness_um: 15.0,
            standoff_um: 12.0,
        },
    };
    let frozen = KineticsParams {
        t_plus_us: f64::INFINITY,
        t_zero_us: f64::INFINITY,
        ..k
    };
    let seq = SequenceSpec {
        placement: Mw1Placement::PreSequence,
        mw1_duration_ns: 0.0,
        ..SequenceSpec::oipd(21.6, 822.0)
    };
    let echo = simulate_oipd(
        &seq,
        &s,
        &frozen,
        &ContrastModel::default(),
        &Mw1Line {
            center_mhz: 822.0,
            fwhm_mhz: 25.0,
        },
    )
    .unwrap();
    let echo_ok = echo.phase_rad.abs() < 1e-12;

    // linearity and scaling laws of the field and contrast expressions
    let m = ContrastModel::default();
    let sphere = |p: f64| SampleSpec {
        polarization: p,
        geometry: Geometry::Sphere { radius_um: 1.0 },
        ..s
    };
    let lin_mean = (mean_field_sphere(&sphere(0.2)).unwrap()
        - 2.0 * mean_field_sphere(&sphere(0.1)).unwrap())
    .abs()
        < 1e-15;
    let half = |d: f64| SampleSpec {
        polarization: 0.0,
        geometry: Geometry::HalfSpace { standoff_um: d },
        ..s
    };
    let v1 = fluctuation_halfspace(&half(2.0)).unwrap();
    let v2 = fluctuation_halfspace(&half(4.0)).unwrap();
    let cubic_var = (v1 / v2 - 8.0).abs() < 1e-9;
    let pol_factor = {
        let v0 = fluctuation_halfspace(&half(2.0)).unwrap();
        let vp = fluctuation_halfspace(&SampleSpec {
            polarization: 0.5,
            ..half(2.0)
        })
        .unwrap();
        (vp / v0 - 0.75).abs() < 1e-12
    };
    let lin_sc = (sc_polarization(2.0e-3, &m) - 2.0 * sc_polarization(1.0e-3, &m)).abs() < 1e-15;
    let quad_sc = {
        let a = sc_fluctuation(1.0e-12, &m).unwrap();
        let b = sc_fluctuation(4.0e-12, &m).unwrap();
        (b - 4.0 * a).abs() < 1e-24
    };
    // geometric factor sanity at the measured configuration
    let g = cylinder_geometry_factor(12.0, 15.0, 35.0);
    let g_expected = 27.0 / (35.0f64 * 35.0 + 729.0).sqrt() - 12.0 / (35.0f64 * 35.0 + 144.0).sqrt();
    let g_ok = (g - g_expected).abs() < 1e-15;

    let ok = trace_ok && pop_ok && echo_ok && lin_mean && cubic_var && pol_factor && lin_sc && quad_sc && g_ok;
    check(
        "10 (property suites)",
        ok,
        &format!(
            "trace {trace_ok}, populations {pop_ok}, echo-null {echo_ok}, mean-linearity {lin_mean}, variance-cubic {cubic_var}, (1-P^2) {pol_factor}, SC-linear {lin_sc}, SC-quadratic {quad_sc}, cylinder-factor {g_ok}"
        ),
    );
}

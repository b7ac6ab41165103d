//! Monte Carlo statistics of the fitting engine: interval coverage,
//! estimator consistency, reparameterization invariance and round-trip
//! identifiability of the kinetics parameters.

use oipd_core::dipolar::{Geometry, SampleSpec};
use oipd_core::fitting::{
    fit_depth_profile, fit_exponential, fit_least_squares, fit_lorentzian, Dataset,
    DepthProfileModel, ExponentialModel, FitModel, FitOptions, LorentzianModel,
};
use oipd_core::kinetics::{
    buildup_curve, relaxation_experiment, KineticsParams, Mw1Line, RelaxChannel, SequenceSpec,
};
use oipd_core::signal::ContrastModel;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn noisy(clean: &[f64], sigma: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    clean
        .iter()
        .zip(sigma)
        .map(|(&v, &s)| v + s * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Count how many of 100 seeded fits cover the truth at 1 and 2 sigma.
fn coverage<F>(truth: f64, mut run: F) -> (usize, usize)
where
    F: FnMut(u64) -> Option<(f64, f64)>,
{
    let mut one = 0;
    let mut two = 0;
    for seed in 0..100 {
        if let Some((value, sigma)) = run(seed) {
            if (value - truth).abs() <= sigma {
                one += 1;
            }
            if (value - truth).abs() <= 2.0 * sigma {
                two += 1;
            }
        }
    }
    (one, two)
}

#[test]
fn lorentzian_interval_coverage() {
    let x: Vec<f64> = (0..81).map(|i| 722.0 + 2.5 * i as f64).collect();
    let truth = [822.0, 25.0, 6.0e-3, 1.0e-4];
    let clean: Vec<f64> = x.iter().map(|&x| LorentzianModel.eval(x, &truth)).collect();
    let sigma = vec![2.0e-4; x.len()];
    let (one, two) = coverage(822.0, |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0F1 + seed);
        let data = Dataset::new(x.clone(), noisy(&clean, &sigma, &mut rng), Some(sigma.clone()))
            .ok()?;
        let fit = fit_lorentzian(&data).ok()?;
        Some((fit.value_of("center")?, fit.uncertainty_of("center")?))
    });
    assert!((60..=75).contains(&one), "1-sigma coverage {one}/100");
    assert!(two >= 90, "2-sigma coverage {two}/100");
}

#[test]
fn exponential_interval_coverage() {
    let x: Vec<f64> = (0..16).map(|i| 2.0 * i as f64).collect();
    let truth = [1.0, 7.0, 0.05];
    let clean: Vec<f64> = x.iter().map(|&x| ExponentialModel.eval(x, &truth)).collect();
    let sigma = vec![0.01; x.len()];
    let (one, two) = coverage(7.0, |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0E2 + seed);
        let data = Dataset::new(x.clone(), noisy(&clean, &sigma, &mut rng), Some(sigma.clone()))
            .ok()?;
        let fit = fit_exponential(&data).ok()?;
        Some((fit.value_of("decay_time")?, fit.uncertainty_of("decay_time")?))
    });
    assert!((60..=75).contains(&one), "1-sigma coverage {one}/100");
    assert!(two >= 90, "2-sigma coverage {two}/100");
}

#[test]
fn depth_profile_interval_coverage() {
    let model = DepthProfileModel {
        radius_um: 35.0,
        thickness_um: 15.0,
        t_eff_us: 7.0,
        c_dip_g_nm3: 8.35,
        rho_per_nm3: 1.62e-3,
        gamma_mhz_per_g: 2.80,
    };
    let depths = vec![12.0, 23.0, 49.0];
    let clean: Vec<f64> = depths.iter().map(|&d| model.eval(d, &[0.10])).collect();
    let sigma: Vec<f64> = clean.iter().map(|v| 0.03 * v.abs()).collect();
    let (one, two) = coverage(0.10, |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0D3 + seed);
        let data = Dataset::new(
            depths.clone(),
            noisy(&clean, &sigma, &mut rng),
            Some(sigma.clone()),
        )
        .ok()?;
        let fit = fit_depth_profile(&data, &model).ok()?;
        Some((fit.values[0], fit.uncertainty(0)))
    });
    assert!((60..=75).contains(&one), "1-sigma coverage {one}/100");
    assert!(two >= 90, "2-sigma coverage {two}/100");
}

#[test]
fn estimator_bias_vanishes_with_noise() {
    // three noise levels per model; the mean estimate approaches the truth
    let x: Vec<f64> = (0..16).map(|i| 2.0 * i as f64).collect();
    let truth = [1.0, 7.0, 0.05];
    let clean: Vec<f64> = x.iter().map(|&x| ExponentialModel.eval(x, &truth)).collect();
    let mut biases = Vec::new();
    for noise in [3.0e-2, 3.0e-3, 3.0e-4] {
        let sigma = vec![noise; x.len()];
        let mut sum = 0.0;
        for seed in 0..60 {
            let mut rng = ChaCha8Rng::seed_from_u64(0xB1A5 + seed);
            let data =
                Dataset::new(x.clone(), noisy(&clean, &sigma, &mut rng), Some(sigma.clone()))
                    .unwrap();
            let fit = fit_exponential(&data).unwrap();
            sum += fit.value_of("decay_time").unwrap();
        }
        biases.push((sum / 60.0 - 7.0).abs());
    }
    assert!(
        biases[2] < biases[0],
        "bias did not shrink with noise: {biases:?}"
    );
    assert!(biases[2] < 1e-3, "residual bias {biases:?}");
}

#[test]
fn reparameterization_leaves_chi2_invariant() {
    // scale x and the decay time together: identical reduced chi-square
    let x: Vec<f64> = (0..16).map(|i| 2.0 * i as f64).collect();
    let truth = [1.0, 7.0, 0.05];
    let mut rng = ChaCha8Rng::seed_from_u64(0xFACE);
    let sigma = vec![0.01; x.len()];
    let clean: Vec<f64> = x.iter().map(|&x| ExponentialModel.eval(x, &truth)).collect();
    let y = noisy(&clean, &sigma, &mut rng);

    let data = Dataset::new(x.clone(), y.clone(), Some(sigma.clone())).unwrap();
    let fit = fit_exponential(&data).unwrap();

    let scale = 10.0;
    let xs: Vec<f64> = x.iter().map(|&v| v * scale).collect();
    let data_scaled = Dataset::new(xs, y, Some(sigma)).unwrap();
    let fit_scaled = fit_exponential(&data_scaled).unwrap();

    assert!(
        (fit.chi2_reduced - fit_scaled.chi2_reduced).abs() < 1e-9 * fit.chi2_reduced.max(1e-30),
        "chi2 {} vs {}",
        fit.chi2_reduced,
        fit_scaled.chi2_reduced
    );
    assert!(
        (fit_scaled.value_of("decay_time").unwrap() - scale * fit.value_of("decay_time").unwrap())
            .abs()
            < 1e-6 * scale * 7.0
    );
}

#[test]
fn engine_results_are_bit_identical() {
    let x: Vec<f64> = (0..16).map(|i| 2.0 * i as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xB17);
    let y: Vec<f64> = x
        .iter()
        .map(|&x| ExponentialModel.eval(x, &[1.0, 7.0, 0.05]) + 0.01 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let data = Dataset::new(x, y, None).unwrap();
    let a = fit_least_squares(&ExponentialModel, &data, &[0.8, 5.0, 0.0], &FitOptions::default())
        .unwrap();
    let b = fit_least_squares(&ExponentialModel, &data, &[0.8, 5.0, 0.0], &FitOptions::default())
        .unwrap();
    assert_eq!(a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
               b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}

#[test]
fn kinetics_parameters_identifiable_roundtrip() {
    // inject (T_plus, T_zero, t_l) into noisy synthetic experiments and
    // recover each within 3 sigma of the fit's own interval, 20 seeds
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
    let m = ContrastModel::default();
    let line = Mw1Line {
        center_mhz: 822.0,
        fwhm_mhz: 25.0,
    };
    let seq = SequenceSpec::oipd(21.6, 822.0);

    let mut misses = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x1D + seed);
        let k = KineticsParams {
            t_plus_us: rng.random_range(4.0..10.0),
            t_zero_us: rng.random_range(15.0..30.0),
            t_buildup_us: rng.random_range(1.0..2.5),
            ..KineticsParams::default()
        };

        // relaxation experiments: peak amplitude noise at 1% of the base
        let taus: Vec<f64> = (0..14).map(|i| 2.5 * i as f64).collect();
        for (channel, truth) in [
            (RelaxChannel::Plus, k.t_plus_us),
            (RelaxChannel::Zero, k.t_zero_us),
        ] {
            let base = relaxation_experiment(channel, &[0.0], &seq, &s, &k, &m, &line, 0.0, 0)
                .unwrap()[0]
                .amplitude;
            let noise = 0.01 * base.abs();
            let pts = relaxation_experiment(channel, &taus, &seq, &s, &k, &m, &line, noise, seed)
                .unwrap();
            let data = Dataset::new(
                pts.iter().map(|p| p.tau_rel_us).collect(),
                pts.iter().map(|p| p.amplitude).collect(),
                Some(vec![noise; pts.len()]),
            )
            .unwrap();
            let fit = fit_exponential(&data).unwrap();
            let got = fit.value_of("decay_time").unwrap();
            let sig = fit.uncertainty_of("decay_time").unwrap();
            if (got - truth).abs() > 3.0 * sig {
                misses += 1;
            }
        }

        // buildup curve for t_l
        let tau_p: Vec<f64> = (0..25).map(|i| 0.25 * i as f64).collect();
        let curve = buildup_curve(&tau_p, &seq, &s, &k, &m, &line, 0.0, 0).unwrap();
        let base = curve.last().unwrap().amplitude.abs();
        let noise = 0.01 * base;
        let noisy_curve = buildup_curve(&tau_p, &seq, &s, &k, &m, &line, noise, seed).unwrap();
        let data = Dataset::new(
            noisy_curve.iter().map(|p| p.tau_p_us).collect(),
            noisy_curve.iter().map(|p| p.amplitude).collect(),
            Some(vec![noise; noisy_curve.len()]),
        )
        .unwrap();
        let fit = fit_exponential(&data).unwrap();
        let got = fit.value_of("decay_time").unwrap();
        let sig = fit.uncertainty_of("decay_time").unwrap();
        if (got - k.t_buildup_us).abs() > 3.0 * sig {
            misses += 1;
        }
    }
    // 60 recoveries at 3 sigma: expect ~0.3% misses per draw
    assert!(misses <= 2, "{misses} of 60 recoveries outside 3 sigma");
}
